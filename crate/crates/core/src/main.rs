use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use depthtube::camera::{Camera, DEFAULT_FOV_DEG};
use depthtube::geometry::{generate_synthetic_bundle, load_dataset, Dataset};
use depthtube::math::Vec3;
use depthtube::runtime::bench::{benchmark_run, format_table};
use depthtube::runtime::export::{write_depth, write_ppm};
use depthtube::runtime::serve::serve_frames;
use depthtube::runtime::{Engine, EngineConfig};
use depthtube::stylemap::{MappingSpec, Orientation, VisualVariables};
use depthtube::tubegen::DEFAULT_SIDES;

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "depthtube", version, about = "Parallel depth-stylized tube renderer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one frame to a PPM image.
    Render {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value = "frame.ppm")]
        output: PathBuf,
        /// Also write the depth buffer as a DPTH dump.
        #[arg(long)]
        depth_out: Option<PathBuf>,
    },
    /// Time rotating frames per worker count and print a TSV table.
    Bench {
        #[command(flatten)]
        scene: SceneArgs,
        /// Comma list of worker counts; defaults to 1,2,4 and --workers if larger.
        #[arg(long, value_delimiter = ',')]
        workers_list: Option<Vec<usize>>,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        /// Also print records as JSON lines on stderr.
        #[arg(long)]
        json: bool,
    },
    /// Stream frames to WebSocket clients.
    Serve {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 9001)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Args)]
struct SceneArgs {
    /// Polyline text file.
    #[arg(long, conflicts_with = "synthetic")]
    dataset: Option<PathBuf>,
    /// Generated bundle: COUNT,VERTS,SEED.
    #[arg(long, value_parser = parse_synthetic)]
    synthetic: Option<(usize, usize, u64)>,
    /// px,py,pz,fx,fy,fz,ux,uy,uz
    #[arg(long, value_parser = parse_camera, allow_hyphen_values = true)]
    camera: Option<[f64; 9]>,
    #[arg(long, default_value_t = DEFAULT_FOV_DEG)]
    fov: f64,
    /// WxH
    #[arg(long, value_parser = parse_size)]
    size: Option<(u32, u32)>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Comma set of size,color,value,alpha (or none).
    #[arg(long)]
    map: Option<VisualVariables>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    radius: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_triple)]
    near_color: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_triple)]
    far_color: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    value_range: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    alpha_range: Option<[f64; 2]>,
    #[arg(long)]
    orientation: Option<Orientation>,
    #[arg(long, default_value_t = DEFAULT_SIDES)]
    tube_sides: usize,
}

fn floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v = floats(s, 2)?;
    Ok([v[0], v[1]])
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v = floats(s, 3)?;
    Ok([v[0], v[1], v[2]])
}

fn parse_camera(s: &str) -> Result<[f64; 9], String> {
    let v = floats(s, 9)?;
    Ok(std::array::from_fn(|i| v[i]))
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    Ok((w, h))
}

fn parse_synthetic(s: &str) -> Result<(usize, usize, u64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected COUNT,VERTS,SEED".into());
    }
    let n = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((n(parts[0])? as usize, n(parts[1])? as usize, n(parts[2])?))
}

impl SceneArgs {
    fn dataset(&self) -> CliResult<Dataset> {
        Ok(match (&self.dataset, self.synthetic) {
            (Some(p), _) => load_dataset(p)?,
            (None, Some((c, v, s))) => generate_synthetic_bundle(c, v, s)?,
            (None, None) => return Err("one of --dataset or --synthetic is required".into()),
        })
    }

    fn camera(&self, ds: &Dataset, default_size: (u32, u32)) -> CliResult<Camera> {
        let (w, h) = self.size.unwrap_or(default_size);
        Ok(match &self.camera {
            Some(c) => Camera::new(
                Vec3::new(c[0], c[1], c[2]),
                Vec3::new(c[3], c[4], c[5]),
                Vec3::new(c[6], c[7], c[8]),
                self.fov,
                w,
                h,
            )?,
            None => {
                let b = ds.bounds();
                Camera::framing(b.center(), b.diagonal() * 0.5, self.fov, w, h)?
            }
        })
    }

    fn spec(&self) -> CliResult<MappingSpec> {
        let mut s = MappingSpec::default();
        if let Some(m) = self.map {
            s.enabled = m;
        }
        if let Some(r) = self.radius {
            s.radius_range = r;
        }
        if let Some(c) = self.near_color {
            s.near_color = c;
        }
        if let Some(c) = self.far_color {
            s.far_color = c;
        }
        if let Some(r) = self.value_range {
            s.value_range = r;
        }
        if let Some(r) = self.alpha_range {
            s.alpha_range = r;
        }
        if let Some(o) = self.orientation {
            s.orientation = o;
        }
        s.validate()?;
        Ok(s)
    }

    fn config(&self) -> EngineConfig {
        EngineConfig {
            workers: self.workers,
            tube_sides: self.tube_sides,
            ..EngineConfig::default()
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Render {
            scene,
            output,
            depth_out,
        } => {
            let ds = scene.dataset()?;
            let cam = scene.camera(&ds, (800, 600))?;
            let mut engine = Engine::new(&ds, cam, scene.spec()?, scene.config())?;
            let stats = engine.render_frame()?;
            write_ppm(engine.frame(), &output)?;
            if let Some(p) = depth_out {
                write_depth(engine.frame(), p)?;
            }
            eprintln!(
                "frame {} in {:.1} ms (sort {:.1} ms, {} rounds, {} workers) -> {}",
                stats.frame_id,
                stats.frame_ms,
                stats.sort_ms,
                stats.sort_rounds,
                stats.workers,
                output.display()
            );
        }
        Command::Bench {
            scene,
            workers_list,
            frames,
            json,
        } => {
            let ds = scene.dataset()?;
            let cam = scene.camera(&ds, (1024, 768))?;
            let counts = workers_list.unwrap_or_else(|| {
                let mut v = vec![1, 2, 4];
                if scene.workers > 4 {
                    v.push(scene.workers);
                }
                v
            });
            if counts.is_empty() || counts.contains(&0) {
                return Err("worker counts must be at least 1".into());
            }
            let records = benchmark_run(&ds, cam, scene.spec()?, scene.config(), &counts, frames)?;
            print!("{}", format_table(&records));
            if json {
                for r in &records {
                    eprintln!("{}", serde_json::to_string(r)?);
                }
            }
        }
        Command::Serve { scene, port, host } => {
            let ds = scene.dataset()?;
            let cam = scene.camera(&ds, (800, 600))?;
            let mut engine = Engine::new(&ds, cam, scene.spec()?, scene.config())?;
            serve_frames(&host, port, &mut engine)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
