//! Line-oriented lattice description.
//!
//! ```text
//! # a free box of radius 2
//! topology = cubic
//! radius = 2
//! bc = free
//! x = 0,0,0
//! y = 1,0,0
//! ```
//!
//! `topology` is one of `cubic`, `dumbbell`, `path:N`, `cycle:N`,
//! `square_ghost` or `strip:R`. Small topologies take the coupling `J`
//! (default 1) and `square_ghost` also `J_ghost` (default `J`).

use std::collections::BTreeMap;
use std::path::Path;

use loopflux::lattice::topology;
use loopflux::rational::{int, parse_rational};
use loopflux::{BoundaryCondition, Error, Lattice, Rational, Result, Site};

const KEYS: [&str; 7] = ["topology", "radius", "bc", "J", "J_ghost", "x", "y"];

#[derive(Debug, Clone)]
pub struct LatticeConfig {
    pub lattice: Lattice,
    pub x: Option<Site>,
    pub y: Option<Site>,
}

pub fn parse_site(text: &str) -> Result<Site> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("ghost") {
        return Ok(Site::Ghost);
    }
    let parts: Vec<&str> = t.trim_matches(|c| c == '(' || c == ')').split(',').collect();
    let bad = || Error::Config(format!("expected a site like 0,0,0 or ghost, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut c = [0i32; 3];
    for (v, p) in c.iter_mut().zip(parts) {
        *v = p.trim().parse().map_err(|_| bad())?;
    }
    Ok(Site::Interior(c))
}

fn parse_lines(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key {k:?}", i + 1)));
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {k:?}", i + 1)));
        }
    }
    Ok(map)
}

fn count(v: &str, what: &str) -> Result<i64> {
    v.parse().map_err(|_| Error::Config(format!("{what} must be an integer, got {v:?}")))
}

impl LatticeConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let map = parse_lines(text)?;
        let get = |k: &str| map.get(k).map(String::as_str);
        let j: Rational = get("J").map(parse_rational).transpose()?.unwrap_or_else(|| int(1));
        let topo = get("topology").unwrap_or("cubic");
        let (name, arg) = match topo.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (topo, None),
        };
        let need = |what: &str| arg.ok_or_else(|| Error::Config(format!("{name} needs a size, as in {name}:{what}")));
        let cubic_keys = ["radius", "bc"];
        for k in ["J", "J_ghost", "radius", "bc"] {
            if map.contains_key(k) && (name == "cubic") != cubic_keys.contains(&k) {
                let scope = if name == "cubic" { "small topologies" } else { "the cubic topology" };
                return Err(Error::Config(format!("{k} applies to {scope} only")));
            }
        }
        let lattice = match name {
            "cubic" => {
                let radius = count(get("radius").unwrap_or("2"), "radius")?;
                let bc: BoundaryCondition = get("bc").unwrap_or("free").parse()?;
                Lattice::cubic(radius as i32, bc)?
            }
            "dumbbell" => topology::dumbbell(j),
            "path" => {
                let n = count(need("N")?, "path length")?;
                if n < 2 {
                    return Err(Error::Config("a path needs at least two sites".into()));
                }
                topology::path(n as usize, j)
            }
            "cycle" => {
                let n = count(need("N")?, "cycle length")?;
                if n < 3 {
                    return Err(Error::Config("a cycle needs at least three sites".into()));
                }
                topology::cycle(n as usize, j)
            }
            "square_ghost" => {
                let jg = get("J_ghost").map(parse_rational).transpose()?.unwrap_or_else(|| j.clone());
                topology::square_with_ghost(j, jg)
            }
            "strip" => {
                let r = count(need("R")?, "strip radius")?;
                if r < 1 {
                    return Err(Error::Config("a strip needs radius at least 1".into()));
                }
                topology::ghosted_strip(r as i32, j)
            }
            other => return Err(Error::Config(format!("unknown topology {other:?}"))),
        };
        if name != "square_ghost" && map.contains_key("J_ghost") {
            return Err(Error::Config("J_ghost applies to square_ghost only".into()));
        }
        let site = |k: &str| -> Result<Option<Site>> {
            let Some(v) = get(k) else { return Ok(None) };
            let s = parse_site(v)?;
            if !lattice.contains(s) {
                return Err(Error::Config(format!("{k} = {s} is not a site of the lattice")));
            }
            Ok(Some(s))
        };
        let (x, y) = (site("x")?, site("y")?);
        Ok(LatticeConfig { lattice, x, y })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The configured `x, y` pair.
    pub fn pair(&self) -> Result<(Site, Site)> {
        match (self.x, self.y) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(Error::Config("the config must set both x and y".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_comments() {
        let c = LatticeConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c.lattice.radius(), Some(2));
        assert!(c.x.is_none());
    }

    #[test]
    fn topologies() {
        let c = LatticeConfig::parse("topology = cycle:4\nJ = 1/2\nx = 0,0,0\ny = 2,0,0").unwrap();
        assert_eq!(c.lattice.num_sites(), 4);
        assert_eq!(c.pair().unwrap(), (Site::at(0, 0, 0), Site::at(2, 0, 0)));
        let s = LatticeConfig::parse("topology = square_ghost\nJ_ghost = 1/3\ny = ghost").unwrap();
        assert_eq!(s.y, Some(Site::Ghost));
    }

    #[test]
    fn rejections() {
        for bad in [
            "colour = red",
            "radius = 2\nradius = 3",
            "topology = cubic\nJ = 1",
            "topology = dumbbell\nbc = plus",
            "topology = path",
            "topology = cycle:2",
            "topology = torus",
            "x = 9,9,9",
            "x = 1,2",
            "no equals sign",
        ] {
            assert!(matches!(LatticeConfig::parse(bad), Err(Error::Config(_) | Error::InvalidLattice(_))), "{bad}");
        }
    }
}
