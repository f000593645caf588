//! `dpt`: command-line interface over the motif toolkit.
//!
//! Exit codes: 0 success, 1 domain errors (one-line `error: Code: detail`
//! on stderr), 2 usage errors. Output is line-oriented and deterministic;
//! `--json` switches every command to a canonical structured form.

use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use dpt_core::diagram::{Indexed, Level};
use dpt_core::invariants::{bracket, normalized_bracket, resolutions, self_writhe, were_set};
use dpt_core::io::{parse, render_svg, serialize, RenderOptions};
use dpt_core::lattice::{
    change_basis, cover, isomorphic, minimize, quotient, translation_symmetries, IsoMode,
    LatticeMatrix,
};
use dpt_core::moves::{load_catalog, validate_schema, SchemaCheck};
use dpt_core::search::{bounded_equivalent, Equivalence, SearchBudget};
use dpt_core::{Decoration, MotifDiagram};

#[derive(Parser)]
#[command(name = "dpt", version, about = "Doubly periodic pseudo tangle motif toolkit")]
struct Cli {
    /// Emit canonical JSON instead of line-oriented text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    L0,
    L1,
    L2,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::L0 => Level::L0,
            LevelArg::L1 => Level::L1,
            LevelArg::L2 => Level::L2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModuloArg {
    Map,
    Gauge,
    GaugeBasis,
}

impl From<ModuloArg> for IsoMode {
    fn from(m: ModuloArg) -> IsoMode {
        match m {
            ModuloArg::Map => IsoMode::MapOnly,
            ModuloArg::Gauge => IsoMode::Gauge,
            ModuloArg::GaugeBasis => IsoMode::GaugeBasis,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check structural validity at the requested level.
    Validate {
        file: String,
        #[arg(long, value_enum, default_value = "l1")]
        level: LevelArg,
    },
    /// Components, classes, and per-component Euler data.
    Info { file: String },
    /// Resolve precrossing classes and print the classical motif.
    Resolve {
        file: String,
        /// Class assignment `class=even` or `class=odd`; repeatable.
        #[arg(long = "assign", value_name = "CLASS=PARITY")]
        assign: Vec<String>,
    },
    /// Fingerprints of all resolutions, one per line.
    Resolutions { file: String },
    /// Weighted resolution set: probability then fingerprint per line.
    Were { file: String },
    /// Torus bracket, self-writhe, and normalized bracket.
    Bracket { file: String },
    /// Finite cover along the sublattice with basis columns (x1,x3),(x2,x4).
    Cover {
        x1: i64,
        x2: i64,
        x3: i64,
        x4: i64,
        file: String,
    },
    /// Quotient along the first nontrivial translation symmetry.
    Quotient { file: String },
    /// Iterate quotients down to a minimal motif.
    Minimize { file: String },
    /// Apply a det-(+1) basis change to all shift vectors.
    Twist {
        x1: i64,
        x2: i64,
        x3: i64,
        x4: i64,
        file: String,
    },
    /// Canonical gauge: spanning-tree shifts zeroed deterministically.
    Regauge { file: String },
    /// Decide isomorphism of two motifs.
    Iso {
        file: String,
        file2: String,
        #[arg(long, value_enum, default_value = "gauge")]
        modulo: ModuloArg,
    },
    /// Bounded bidirectional move search between two motifs.
    Equiv {
        file: String,
        file2: String,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 8)]
        size: usize,
    },
    /// Render the motif tiled P x Q as SVG.
    Render {
        file: String,
        #[arg(long, num_args = 2, value_names = ["P", "Q"], default_values_t = [1u32, 1u32])]
        tiles: Vec<u32>,
        #[arg(long)]
        out: String,
    },
    /// Validate every schema of the active move catalog.
    SchemaValidate,
}

fn read_motif(path: &str) -> Result<MotifDiagram, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("IoError: {path}: {e}"))?;
    parse(&text).map_err(|e| e.to_string())
}

fn parse_assignment(specs: &[String]) -> Result<BTreeMap<String, Decoration>, String> {
    let mut out = BTreeMap::new();
    for s in specs {
        let (class, parity) = s
            .split_once('=')
            .ok_or_else(|| format!("UsageError: --assign wants CLASS=PARITY, got {s:?}"))?;
        let dec = match parity {
            "even" => Decoration::OverEven,
            "odd" => Decoration::OverOdd,
            other => return Err(format!("UsageError: parity must be even|odd, got {other:?}")),
        };
        out.insert(class.to_string(), dec);
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<String, String> {
    match &cli.cmd {
        Cmd::Validate { file, level } => {
            let d = read_motif(file)?;
            let report = d.validate(Level::from(*level));
            if cli.json {
                let errs: Vec<String> = report.errors.iter().map(|e| e.to_string()).collect();
                let out = json!({"valid": errs.is_empty(), "errors": errs});
                if report.errors.is_empty() {
                    Ok(out.to_string())
                } else {
                    Err(report.errors[0].to_string())
                }
            } else if report.errors.is_empty() {
                Ok("valid".to_string())
            } else {
                Err(report.errors[0].to_string())
            }
        }
        Cmd::Info { file } => {
            let d = read_motif(file)?;
            d.require(Level::L0).map_err(|e| e.to_string())?;
            let idx = Indexed::build(&d);
            let faces = idx.faces();
            let topo = idx.component_topology(&faces);
            let classes: Vec<String> = d.component_classes().iter().map(|c| c.to_string()).collect();
            if cli.json {
                Ok(json!({
                    "crossings": d.crossing_count(),
                    "edges": d.edges.len(),
                    "free_loops": d.free_loops.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
                    "precrossing_classes": d.classes.keys().collect::<Vec<_>>(),
                    "strand_classes": classes,
                    "components": topo.iter().map(|t| json!({
                        "vertices": t.vertices, "edges": t.edges, "faces": t.faces,
                        "euler": t.euler, "shift_rank": t.shift_rank,
                    })).collect::<Vec<_>>(),
                })
                .to_string())
            } else {
                let mut lines = vec![
                    format!("crossings {}", d.crossing_count()),
                    format!("edges {}", d.edges.len()),
                    format!("free-loops {}", d.free_loops.len()),
                    format!(
                        "classes {}",
                        d.classes.keys().cloned().collect::<Vec<_>>().join(",")
                    ),
                    format!("strand-classes {}", classes.join(",")),
                ];
                for (i, t) in topo.iter().enumerate() {
                    lines.push(format!(
                        "component {i}: V={} E={} F={} euler={} shift-rank={}",
                        t.vertices, t.edges, t.faces, t.euler, t.shift_rank
                    ));
                }
                Ok(lines.join("\n"))
            }
        }
        Cmd::Resolve { file, assign } => {
            let d = read_motif(file)?;
            let a = parse_assignment(assign)?;
            let r = d.resolve(&a).map_err(|e| e.to_string())?;
            if cli.json {
                Ok(json!({"motif": serialize(&r)}).to_string())
            } else {
                Ok(serialize(&r).trim_end().to_string())
            }
        }
        Cmd::Resolutions { file } => {
            let d = read_motif(file)?;
            let rs = resolutions(&d).map_err(|e| e.to_string())?;
            let mut fps: Vec<&str> = rs.iter().map(|r| r.fingerprint.as_str()).collect();
            fps.sort();
            fps.dedup();
            if cli.json {
                Ok(json!({"count": fps.len(), "fingerprints": fps}).to_string())
            } else {
                Ok(fps.join("\n"))
            }
        }
        Cmd::Were { file } => {
            let d = read_motif(file)?;
            let ws = were_set(&d).map_err(|e| e.to_string())?;
            if cli.json {
                Ok(json!({
                    "entries": ws.iter().map(|(f, p)| json!({
                        "probability": p.to_string(), "fingerprint": f,
                    })).collect::<Vec<_>>(),
                })
                .to_string())
            } else {
                Ok(ws
                    .iter()
                    .map(|(f, p)| format!("{p} {f}"))
                    .collect::<Vec<_>>()
                    .join("\n"))
            }
        }
        Cmd::Bracket { file } => {
            let d = read_motif(file)?;
            let b = bracket(&d).map_err(|e| e.to_string())?;
            let w = self_writhe(&d).map_err(|e| e.to_string())?;
            let n = normalized_bracket(&d).map_err(|e| e.to_string())?;
            if cli.json {
                Ok(json!({
                    "bracket": b.to_string(),
                    "self_writhe": w,
                    "normalized": n.to_string(),
                })
                .to_string())
            } else {
                Ok(format!("bracket {b}\nself-writhe {w}\nnormalized {n}"))
            }
        }
        Cmd::Cover { x1, x2, x3, x4, file } => {
            let d = read_motif(file)?;
            let l = LatticeMatrix::new(*x1, *x2, *x3, *x4);
            let c = cover(&d, &l).map_err(|e| e.to_string())?;
            if cli.json {
                Ok(json!({"motif": serialize(&c)}).to_string())
            } else {
                Ok(serialize(&c).trim_end().to_string())
            }
        }
        Cmd::Quotient { file } => {
            let d = read_motif(file)?;
            let sym = translation_symmetries(&d)
                .into_iter()
                .find(|s| !s.is_identity())
                .ok_or("NoSymmetry: motif has no nontrivial translation symmetry")?;
            let (q, l) = quotient(&d, &sym).map_err(|e| e.to_string())?;
            if cli.json {
                Ok(json!({
                    "motif": serialize(&q),
                    "sublattice": [l.x1, l.x2, l.x3, l.x4],
                })
                .to_string())
            } else {
                Ok(format!(
                    "sublattice {} {} {} {}\n{}",
                    l.x1,
                    l.x2,
                    l.x3,
                    l.x4,
                    serialize(&q).trim_end()
                ))
            }
        }
        Cmd::Minimize { file } => {
            let d = read_motif(file)?;
            let (m, tower) = minimize(&d);
            if cli.json {
                Ok(json!({
                    "motif": serialize(&m),
                    "tower": tower.iter().map(|l| [l.x1, l.x2, l.x3, l.x4]).collect::<Vec<_>>(),
                })
                .to_string())
            } else {
                let mut lines: Vec<String> = tower
                    .iter()
                    .map(|l| format!("sublattice {} {} {} {}", l.x1, l.x2, l.x3, l.x4))
                    .collect();
                lines.push(serialize(&m).trim_end().to_string());
                Ok(lines.join("\n"))
            }
        }
        Cmd::Twist { x1, x2, x3, x4, file } => {
            let d = read_motif(file)?;
            let m = LatticeMatrix::new(*x1, *x2, *x3, *x4);
            let t = change_basis(&d, &m).map_err(|e| e.to_string())?;
            if cli.json {
                Ok(json!({"motif": serialize(&t)}).to_string())
            } else {
                Ok(serialize(&t).trim_end().to_string())
            }
        }
        Cmd::Regauge { file } => {
            let d = read_motif(file)?;
            let g = d.canonical_regauge();
            if cli.json {
                Ok(json!({"motif": serialize(&g)}).to_string())
            } else {
                Ok(serialize(&g).trim_end().to_string())
            }
        }
        Cmd::Iso { file, file2, modulo } => {
            let d1 = read_motif(file)?;
            let d2 = read_motif(file2)?;
            let iso = isomorphic(&d1, &d2, IsoMode::from(*modulo));
            if cli.json {
                Ok(json!({"isomorphic": iso.is_some()}).to_string())
            } else {
                Ok(if iso.is_some() { "isomorphic" } else { "not-isomorphic" }.to_string())
            }
        }
        Cmd::Equiv { file, file2, depth, size } => {
            let d1 = read_motif(file)?;
            let d2 = read_motif(file2)?;
            let catalog = load_catalog()?;
            let budget = SearchBudget {
                max_depth: *depth,
                max_size: *size,
                ..SearchBudget::default()
            };
            match bounded_equivalent(&d1, &d2, &catalog, &budget) {
                Equivalence::Equivalent(path) => {
                    if cli.json {
                        Ok(json!({
                            "equivalent": true,
                            "path": path.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                        })
                        .to_string())
                    } else {
                        let mut lines = vec![format!("equivalent {}", path.len())];
                        lines.extend(path.iter().map(|s| s.to_string()));
                        Ok(lines.join("\n"))
                    }
                }
                Equivalence::Unknown { reason } => {
                    if cli.json {
                        Ok(json!({"equivalent": null, "reason": reason}).to_string())
                    } else {
                        Ok(format!("unknown {reason}"))
                    }
                }
            }
        }
        Cmd::Render { file, tiles, out } => {
            let d = read_motif(file)?;
            d.require(Level::L1).map_err(|e| e.to_string())?;
            let (p, q) = (tiles[0], tiles[1]);
            if p < 1 || q < 1 {
                return Err("UsageError: tiles must be >= 1".to_string());
            }
            let svg = render_svg(&d, (p, q), &RenderOptions::default());
            std::fs::write(out, svg).map_err(|e| format!("IoError: {out}: {e}"))?;
            if cli.json {
                Ok(json!({"written": out}).to_string())
            } else {
                Ok(format!("wrote {out}"))
            }
        }
        Cmd::SchemaValidate => {
            let catalog = load_catalog()?;
            let mut lines = Vec::new();
            let mut entries = Vec::new();
            let mut all_ok = true;
            for s in &catalog.schemas {
                match validate_schema(s) {
                    SchemaCheck::Pass => {
                        lines.push(format!("{}: pass", s.name));
                        entries.push(json!({"schema": s.name, "pass": true}));
                    }
                    SchemaCheck::Fail { reason } => {
                        all_ok = false;
                        lines.push(format!("{}: fail {reason}", s.name));
                        entries.push(json!({"schema": s.name, "pass": false, "reason": reason}));
                    }
                }
            }
            let out = if cli.json {
                json!({"schemas": entries}).to_string()
            } else {
                lines.join("\n")
            };
            if all_ok {
                Ok(out)
            } else {
                println!("{out}");
                Err("SchemaError: catalog contains failing schemas".to_string())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if !out.is_empty() {
                println!("{out}");
            }
            ExitCode::SUCCESS
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
