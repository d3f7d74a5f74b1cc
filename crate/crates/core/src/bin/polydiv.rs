use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polydiv::elements::Config;
use polydiv::geometry::Point2;
use polydiv::harness::{
    cmd_basis, cmd_condstudy, cmd_element, cmd_rtcompare, cmd_validate, ElementRequest, Families, HarnessError, StudyConfig,
};
use polydiv::hdiv_basis::SpaceFamily;
use polydiv::rt_classical::RtShape;

#[derive(Parser)]
#[command(name = "polydiv", version, about = "H(div)-conformal elements on polygons")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the shape rules for a configuration.
    Validate {
        #[arg(long)]
        shape: String,
        #[arg(long, default_value = "IIb", value_parser = parse_config)]
        config: Config,
        /// Direction vector of the I-family misc moment, as "x,y".
        #[arg(long, default_value = "1,1", value_parser = parse_point)]
        v: Point2,
    },
    /// Export the canonical basis.
    Basis(ElementArgs),
    /// Build an element: transfer matrix, tuned traces and a summary.
    Element(ElementArgs),
    /// Conditioning sweep over a parameter grid.
    Condstudy(StudyArgs),
    /// Compare the reduced IIb element with classical Raviart–Thomas.
    Rtcompare {
        #[arg(long, value_enum)]
        shape: RtShapeArg,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Classical,
    Reduced,
    ReducedNatural,
}

impl From<SpaceArg> for SpaceFamily {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Classical => SpaceFamily::Classical,
            SpaceArg::Reduced => SpaceFamily::ReducedLagrangeBC,
            SpaceArg::ReducedNatural => SpaceFamily::ReducedNatural,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RtShapeArg {
    Triangle,
    Quad,
}

#[derive(Args)]
struct ElementArgs {
    /// Catalog key or path to a JSON vertex file.
    #[arg(long)]
    shape: String,
    #[arg(long, value_enum, default_value = "classical")]
    space: SpaceArg,
    #[arg(long, default_value = "IIb", value_parser = parse_config)]
    config: Config,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Boundary projector code (1–7).
    #[arg(long, default_value_t = 3)]
    bproj: u8,
    /// Inner projector code (1–7).
    #[arg(long, default_value_t = 3)]
    iproj: u8,
    /// Boundary constructor code (1–3).
    #[arg(long, default_value_t = 1)]
    bcons: u8,
    /// Inner constructor code (1–5).
    #[arg(long, default_value_t = 2)]
    icons: u8,
    #[arg(long)]
    h: Option<f64>,
    /// Skip the shape rules.
    #[arg(long)]
    unchecked: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    /// JSON file with the full study grid; other flags are ignored when given.
    #[arg(long)]
    study: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    shape: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "IIb", value_parser = parse_config)]
    config: Vec<Config>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "classical")]
    space: Vec<SpaceArg>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    bproj: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    iproj: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    bcons: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    icons: Vec<u8>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    svg: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_config(s: &str) -> Result<Config, String> {
    Config::parse(s).ok_or_else(|| format!("unknown config {s}; expected one of Ia, Ib, IbShifted, IIa, IIb, IIbShifted"))
}

fn parse_point(s: &str) -> Result<Point2, String> {
    let (a, b) = s.split_once(',').ok_or("expected x,y")?;
    Ok(Point2::new(a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

fn request(a: &ElementArgs) -> Result<ElementRequest, HarnessError> {
    Ok(ElementRequest {
        shape: a.shape.clone(),
        space: a.space.into(),
        config: a.config,
        k: a.k,
        families: Families::from_codes(a.bproj, a.iproj, a.bcons, a.icons)?,
        h: a.h,
        unchecked: a.unchecked,
    })
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.cmd {
        Cmd::Validate { shape, config, v } => {
            let r = cmd_validate(&shape, config, v)?;
            print!("{}", r.render());
            Ok(r.admissible)
        }
        Cmd::Basis(a) => {
            let s = cmd_basis(&request(&a)?, &a.out)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(true)
        }
        Cmd::Element(a) => {
            let s = cmd_element(&request(&a)?, &a.out)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(true)
        }
        Cmd::Condstudy(a) => {
            let cfg = match &a.study {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
                    serde_json::from_str(&text)?
                }
                None => StudyConfig {
                    shapes: a.shape.clone(),
                    orders: a.k.clone(),
                    configs: a.config.clone(),
                    spaces: a.space.iter().map(|&s| s.into()).collect(),
                    bproj: a.bproj.clone(),
                    iproj: a.iproj.clone(),
                    bcons: a.bcons.clone(),
                    icons: a.icons.clone(),
                    h: a.h,
                    expect_fail: vec![],
                    out: Some(a.out.clone()),
                    svg: a.svg,
                },
            };
            let res = cmd_condstudy(&cfg)?;
            print!("{}", res.to_csv());
            for (tag, why) in &res.failures {
                eprintln!("not built: {tag}: {why}");
            }
            Ok(true)
        }
        Cmd::Rtcompare { shape, k, h, out } => {
            let shape = match shape {
                RtShapeArg::Triangle => RtShape::Triangle,
                RtShapeArg::Quad => RtShape::Quad,
            };
            let r = cmd_rtcompare(shape, k, h)?;
            let json = serde_json::to_string_pretty(&r)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|source| HarnessError::Io { path: dir.clone(), source })?;
                let path = dir.join("rtcompare.json");
                std::fs::write(&path, &json).map_err(|source| HarnessError::Io { path, source })?;
            }
            println!("{json}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
