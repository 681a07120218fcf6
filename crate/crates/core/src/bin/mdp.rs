use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use mdp_core::config::PipelineConfig;
use mdp_core::eval::{
    disparity_sweep_experiment, layer_sweep_experiment, render_rig_views, ring_targets, standard_config,
    standard_rig, SweepTable, SyntheticScene, STANDARD_VIEW_SIZE,
};
use mdp_core::mdp::container::{mdp_read, mdp_write};
use mdp_core::mdp::{build_global_mdp, footprint_line};
use mdp_core::pose::{orbit, parse_pose_file, PoseMode, PoseRequest};
use mdp_core::render::{render, SoftZConfig, TargetCamera};
use mdp_core::rig_file::{default_image_name, load_rig_and_images, RigFile};
use mdp_core::service::{encode_frame, serve, FrameEncoding, ServiceState, DEFAULT_MAX_PIXELS};
use mdp_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "mdp", version, about = "Multi depth panorama builder, renderer and viewer service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Panorama,
    Perspective,
}

impl From<Mode> for PoseMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Panorama => PoseMode::Panorama,
            Mode::Perspective => PoseMode::Perspective,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct an MDP from a calibrated rig and its images.
    Build {
        rig: PathBuf,
        image_dir: PathBuf,
        config: PathBuf,
        out: PathBuf,
    },
    /// Render novel views; writes one PNG per pose.
    Render {
        input: PathBuf,
        /// JSON file holding one pose request or an array of them.
        #[arg(long, conflicts_with = "orbit", required_unless_present = "orbit")]
        poses: Option<PathBuf>,
        /// Number of poses on a horizontal circle around the rig center.
        #[arg(long)]
        orbit: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        orbit_radius: f64,
        #[arg(long, value_enum, default_value = "panorama")]
        mode: Mode,
        /// Orbit frame width; defaults to the MDP width.
        #[arg(long)]
        width: Option<usize>,
        /// Orbit frame height; defaults to the MDP height.
        #[arg(long)]
        height: Option<usize>,
        /// Pipeline config supplying the soft z-buffer settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Layer-count and translation sweeps against the ray-cast oracle.
    Eval {
        /// Scene TOML; the built-in standard scene when omitted.
        scene: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        layers: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
        translations: Vec<f64>,
        /// Target offset from the rig center used by the layer sweep.
        #[arg(long, default_value_t = 0.1)]
        offset: f64,
        #[arg(long, default_value_t = STANDARD_VIEW_SIZE)]
        view_size: usize,
        /// Also write both tables as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve frames over HTTP for the interactive viewer.
    Serve {
        input: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long, default_value_t = DEFAULT_MAX_PIXELS)]
        max_pixels: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print dimensions, storage and shell radii of an MDP file.
    Info { input: PathBuf },
    /// Write a synthetic rig, its ray-traced images and a matching config.
    Synth {
        out_dir: PathBuf,
        /// Scene TOML; the built-in standard scene when omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = STANDARD_VIEW_SIZE)]
        view_size: usize,
    },
}

struct Failure {
    stage: &'static str,
    error: Error,
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for mdp_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure { stage, error })
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::InvalidInput => 2,
        ErrorKind::Io => 3,
        ErrorKind::Calibration => 4,
        ErrorKind::Format => 5,
        ErrorKind::Numeric => 6,
    }
}

fn load_config(path: Option<&Path>, default: PipelineConfig) -> mdp_core::Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(default),
    }
}

fn load_scene(path: Option<&Path>) -> mdp_core::Result<SyntheticScene> {
    match path {
        Some(p) => SyntheticScene::load(p),
        None => Ok(SyntheticScene::standard()),
    }
}

fn create_dir(dir: &Path) -> mdp_core::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Build {
            rig,
            image_dir,
            config,
            out,
        } => {
            let cfg = PipelineConfig::load(&config).stage("config")?;
            let (rig, images) = load_rig_and_images(&rig, &image_dir, cfg.input.srgb_to_linear).stage("load inputs")?;
            let mdp = build_global_mdp(&rig, &images, &cfg).stage("reconstruct")?;
            mdp_write(&mdp, &out).stage("write")?;
            println!("{}", footprint_line(mdp.mapping.width, mdp.mapping.height, mdp.shell_count()));
        }
        Command::Render {
            input,
            poses,
            orbit: orbit_n,
            orbit_radius,
            mode,
            width,
            height,
            config,
            out_dir,
        } => {
            let cfg = load_config(config.as_deref(), PipelineConfig::default()).stage("config")?;
            let zcfg = cfg.soft_z().stage("config")?;
            let mdp = mdp_read(&input).stage("load mdp")?;
            let requests = match (poses, orbit_n) {
                (Some(p), _) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e)).stage("load poses")?;
                    parse_pose_file(&text, &p).stage("load poses")?
                }
                (None, Some(n)) => orbit(
                    n,
                    orbit_radius,
                    mode.into(),
                    width.unwrap_or(mdp.mapping.width),
                    height.unwrap_or(mdp.mapping.height),
                ),
                (None, None) => unreachable!("clap requires poses or orbit"),
            };
            let targets = requests
                .iter()
                .map(|r| r.target(mdp.mapping.v_fov_slope))
                .collect::<mdp_core::Result<Vec<_>>>()
                .stage("load poses")?;
            create_dir(&out_dir).stage("write")?;
            for (req, target) in requests.iter().zip(&targets) {
                let out = render(&mdp, target, &zcfg).stage("render")?;
                if let Some(w) = &out.warning {
                    eprintln!("note: frame {}: {w}", req.frame_id);
                }
                let path = out_dir.join(format!("frame_{:04}.png", req.frame_id));
                let bytes = encode_frame(&out.image, FrameEncoding::Png).stage("write")?;
                std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e)).stage("write")?;
                println!("{}", path.display());
            }
        }
        Command::Eval {
            scene,
            config,
            layers,
            translations,
            offset,
            view_size,
            out,
        } => {
            let scene = load_scene(scene.as_deref()).stage("scene")?;
            let cfg = load_config(config.as_deref(), standard_config()).stage("config")?;
            let rig = standard_rig(view_size).stage("rig")?;
            let mapping = cfg.mapping().stage("config")?;
            let layer_targets = ring_targets(mapping, offset).stage("targets")?;
            let center = [TargetCamera::panorama(mapping, mdp_core::geometry::Extrinsics::identity())];
            let t1 = layer_sweep_experiment(&scene, &rig, &cfg, &layers, &layer_targets).stage("layer sweep")?;
            println!("{t1}");
            let t3 = disparity_sweep_experiment(&scene, &rig, &cfg, &translations, &center).stage("translation sweep")?;
            println!("{t3}");
            if let Some(path) = out {
                let tables: [&SweepTable; 2] = [&t1, &t3];
                let json = serde_json::to_string_pretty(&tables).expect("tables serialize");
                std::fs::write(&path, json).map_err(|e| Error::io(&path, e)).stage("write")?;
            }
        }
        Command::Serve {
            input,
            bind,
            max_pixels,
            config,
        } => {
            let cfg = load_config(config.as_deref(), PipelineConfig::default()).stage("config")?;
            let zcfg: SoftZConfig = cfg.soft_z().stage("config")?;
            let mdp = mdp_read(&input).stage("load mdp")?;
            let state = Arc::new(ServiceState::new(mdp, zcfg, max_pixels).stage("load mdp")?);
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| Error::io("tokio runtime", e))
                .stage("serve")?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind).await.map_err(|e| Error::io(&bind, e))?;
                log::info!("listening on {}", listener.local_addr().map_err(|e| Error::io(&bind, e))?);
                serve(listener, state).await.map_err(|e| Error::io(&bind, e))
            })
            .stage("serve")?;
        }
        Command::Info { input } => {
            let mdp = mdp_read(&input).stage("load mdp")?;
            println!("{}", footprint_line(mdp.mapping.width, mdp.mapping.height, mdp.shell_count()));
            for m in 0..mdp.shell_count() {
                let (lo, hi) = mdp.partition.range(m);
                println!("shell {m}: {lo:.4} .. {hi:.4} m");
            }
        }
        Command::Synth {
            out_dir,
            scene,
            view_size,
        } => {
            let scene = load_scene(scene.as_deref()).stage("scene")?;
            let rig = standard_rig(view_size).stage("rig")?;
            let images = render_rig_views(&scene, &rig);
            let image_dir = out_dir.join("images");
            create_dir(&image_dir).stage("write")?;
            for (i, img) in images.iter().enumerate() {
                img.save(&image_dir.join(default_image_name(i))).stage("write")?;
            }
            let write = |name: &str, text: String| {
                let p = out_dir.join(name);
                std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
            };
            write("rig.toml", RigFile::from_rig(&rig, None).to_toml()).stage("write")?;
            write("config.toml", standard_config().to_toml()).stage("write")?;
            write("scene.toml", scene.to_toml()).stage("write")?;
            let pose = serde_json::to_string_pretty(&PoseRequest::identity(PoseMode::Panorama, 640, 320))
                .expect("pose serializes");
            write("pose.json", pose).stage("write")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}: {}", f.stage, f.error);
            ExitCode::from(exit_code(f.error.kind()))
        }
    }
}
