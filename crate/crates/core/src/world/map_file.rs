//! Plain-text map format.
//!
//! One record per line; `#` starts a comment. Records are a keyword followed
//! by `key=value` pairs:
//!
//! ```text
//! version 1
//! lane id=1 class=normal width=3.5 limit=10 left=2 right=0 succ=8 junction=0 points=-160,-1.75;-10,-1.75
//! light from=1 to=8 green=15 yellow=3 red=12 offset=0
//! route id=0 start=2 path=1,8,5
//! ```
//!
//! `left`, `right`, `succ` and `junction` are optional. Numbers use the
//! shortest decimal form that round-trips, so write/parse is lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Polyline, Vec2};
use crate::world::map::{Lane, LaneClass, LaneId, RoadMap, Route, TrafficLight};

const VERSION: u32 = 1;

pub fn write_map(map: &RoadMap) -> String {
    let mut out = String::new();
    out.push_str("# tactix road map\n");
    let _ = writeln!(out, "version {VERSION}");
    for l in map.lanes() {
        let _ = write!(
            out,
            "lane id={} class={} width={} limit={}",
            l.id,
            l.class.as_str(),
            l.width,
            l.speed_limit
        );
        if let Some(x) = l.left {
            let _ = write!(out, " left={x}");
        }
        if let Some(x) = l.right {
            let _ = write!(out, " right={x}");
        }
        if let Some(x) = l.successor {
            let _ = write!(out, " succ={x}");
        }
        if l.junction {
            out.push_str(" junction=1");
        }
        let pts: Vec<String> = l
            .centerline
            .points()
            .iter()
            .map(|p| format!("{},{}", p.x, p.y))
            .collect();
        let _ = writeln!(out, " points={}", pts.join(";"));
    }
    for t in &map.lights {
        let _ = writeln!(
            out,
            "light from={} to={} green={} yellow={} red={} offset={}",
            t.controlled_connection.0, t.controlled_connection.1, t.green_s, t.yellow_s, t.red_s, t.phase_offset
        );
    }
    for r in &map.routes {
        let path: Vec<String> = r.path.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(out, "route id={} start={} path={}", r.id, r.start, path.join(","));
    }
    out
}

struct Record<'a> {
    line: usize,
    fields: BTreeMap<&'a str, &'a str>,
}

impl<'a> Record<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn raw(&self, key: &str) -> Result<&'a str> {
        self.fields
            .get(key)
            .copied()
            .ok_or_else(|| self.err(format!("missing `{key}`")))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| self.err(format!("bad value `{v}` for `{key}`")))
    }

    fn opt_lane(&self, key: &str) -> Result<Option<LaneId>> {
        match self.fields.get(key) {
            None => Ok(None),
            Some(_) => Ok(Some(LaneId(self.num(key)?))),
        }
    }
}

pub fn parse_map(text: &str) -> Result<RoadMap> {
    let mut lanes = Vec::new();
    let mut lights = Vec::new();
    let mut routes = Vec::new();
    let mut saw_version = false;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let kind = toks.next().unwrap();
        if kind == "version" {
            let v: u32 = toks.next().and_then(|v| v.parse().ok()).ok_or(Error::Parse {
                line: line_no,
                msg: "bad version".into(),
            })?;
            if v != VERSION {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unsupported map version {v}"),
                });
            }
            saw_version = true;
            continue;
        }
        let mut fields = BTreeMap::new();
        for t in toks {
            let (k, v) = t.split_once('=').ok_or(Error::Parse {
                line: line_no,
                msg: format!("expected key=value, got `{t}`"),
            })?;
            fields.insert(k, v);
        }
        let rec = Record {
            line: line_no,
            fields,
        };
        match kind {
            "lane" => {
                let class_s = rec.raw("class")?;
                let class = LaneClass::parse(class_s)
                    .ok_or_else(|| rec.err(format!("unknown lane class `{class_s}`")))?;
                let mut pts = Vec::new();
                for p in rec.raw("points")?.split(';') {
                    let (x, y) = p
                        .split_once(',')
                        .ok_or_else(|| rec.err(format!("bad point `{p}`")))?;
                    let x: f64 = x.parse().map_err(|_| rec.err(format!("bad point `{p}`")))?;
                    let y: f64 = y.parse().map_err(|_| rec.err(format!("bad point `{p}`")))?;
                    pts.push(Vec2::new(x, y));
                }
                let centerline =
                    Polyline::new(pts).ok_or_else(|| rec.err("centerline needs positive length"))?;
                lanes.push(Lane {
                    id: LaneId(rec.num("id")?),
                    centerline,
                    width: rec.num("width")?,
                    class,
                    speed_limit: rec.num("limit")?,
                    left: rec.opt_lane("left")?,
                    right: rec.opt_lane("right")?,
                    successor: rec.opt_lane("succ")?,
                    junction: rec.fields.get("junction").is_some_and(|v| *v == "1"),
                });
            }
            "light" => lights.push(TrafficLight {
                controlled_connection: (LaneId(rec.num("from")?), LaneId(rec.num("to")?)),
                green_s: rec.num("green")?,
                yellow_s: rec.num("yellow")?,
                red_s: rec.num("red")?,
                phase_offset: rec.num("offset")?,
            }),
            "route" => {
                let path = rec
                    .raw("path")?
                    .split(',')
                    .map(|p| p.parse().map(LaneId).map_err(|_| rec.err(format!("bad lane `{p}`"))))
                    .collect::<Result<Vec<_>>>()?;
                routes.push(Route {
                    id: rec.num("id")?,
                    start: LaneId(rec.num("start")?),
                    path,
                });
            }
            other => return Err(rec.err(format!("unknown record `{other}`"))),
        }
    }
    if !saw_version {
        return Err(Error::Parse {
            line: 0,
            msg: "missing version record".into(),
        });
    }
    RoadMap::new(lanes, lights, routes)
}

pub fn load_map(path: &Path) -> Result<RoadMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_map(&text)
}
