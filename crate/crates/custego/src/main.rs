//! Command-line frontend: encode/decode, embed/extract, stability
//! analysis, and the experiment grid. Machine-readable JSON goes to
//! stdout, human summaries to stderr; exit codes are 0 ok, 2 format
//! error, 3 capacity error, 4 extraction failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use custego::cbssm::{analyze_restoration, features_csv, per_frame_features};
use custego::codec::{decode_video, encode_frame, write_video, Qp};
use custego::eval::{run_experiment, sequence_psnr, synth_corpus, tew_embed};
use custego::frame_io::{load_video, pad_to_ctu, write_y4m, VideoFormat, VideoSequence};
use custego::stc::StcParams;
use custego::stego::{embed, extract, Scheme, StegoHeader, StegoPackage};
use custego::{Error, Result};

#[derive(Parser)]
#[command(name = "custego", version, about = "Quad-tree video codec with block-structure steganography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InputVideo {
    /// Input video file (.y4m, or raw planar with --width/--height)
    #[arg(long)]
    input: PathBuf,
    /// Raw input width (omit for y4m)
    #[arg(long)]
    width: Option<u32>,
    /// Raw input height (omit for y4m)
    #[arg(long)]
    height: Option<u32>,
    /// Raw input carries interleaved 4:2:0 chroma planes to skip
    #[arg(long, default_value_t = false)]
    chroma420: bool,
    /// Process only the first N frames
    #[arg(long)]
    frames: Option<usize>,
}

impl InputVideo {
    fn load(&self) -> Result<VideoSequence> {
        let format = match (self.width, self.height) {
            (None, None) => VideoFormat::Y4m,
            (Some(w), Some(h)) => VideoFormat::Raw { width: w, height: h, chroma420: self.chroma420 },
            _ => return Err(Error::invalid("--width and --height must be given together")),
        };
        let mut video = load_video(&self.input, format)?;
        if let Some(n) = self.frames {
            if n == 0 || n > video.frames.len() {
                return Err(Error::invalid(format!(
                    "--frames {n} outside 1..={}",
                    video.frames.len()
                )));
            }
            video.frames.truncate(n);
        }
        // encoder operates on the CTU-padded plane
        video.frames = video.frames.iter().map(pad_to_ctu).collect();
        Ok(video)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Encode a video to a CUSG bitstream
    Encode {
        #[command(flatten)]
        video: InputVideo,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 26)]
        qp: u8,
    },
    /// Decode a CUSG bitstream to Y4M
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Embed a message into a video's block structure
    Embed {
        #[command(flatten)]
        video: InputVideo,
        /// Stego bitstream output
        #[arg(long)]
        output: PathBuf,
        /// Sidecar header output (JSON)
        #[arg(long)]
        header_out: PathBuf,
        /// Side-information output (required by full-scheme extraction)
        #[arg(long)]
        sideinfo_out: Option<PathBuf>,
        /// Message file; its bytes are embedded MSB-first
        #[arg(long, conflicts_with = "random_bits")]
        message_file: Option<PathBuf>,
        /// Embed N seeded random bits instead of a file
        #[arg(long)]
        random_bits: Option<usize>,
        #[arg(long, default_value_t = 26)]
        qp: u8,
        /// Payload in message bits per carrier bit, 0..=1
        #[arg(long, default_value_t = 0.3)]
        payload: f64,
        /// full (all non-64x64 CUs, needs side info) or 8x8 (blind)
        #[arg(long, default_value = "full")]
        scheme: String,
        /// Trellis constraint height
        #[arg(long, default_value_t = 7)]
        h: u8,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extract the embedded message
    Extract {
        /// Stego bitstream
        #[arg(long)]
        input: PathBuf,
        /// Sidecar header written by embed
        #[arg(long)]
        header: PathBuf,
        /// Side information (full scheme)
        #[arg(long)]
        sideinfo: Option<PathBuf>,
        /// Recovered message output (bits packed MSB-first)
        #[arg(long)]
        output: PathBuf,
    },
    /// Stability features and restoration analysis of a video
    Analyze {
        #[command(flatten)]
        video: InputVideo,
        #[arg(long, default_value_t = 26)]
        qp: u8,
        /// Write the per-frame feature CSV here
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Run the metric/detector grid over a corpus directory (.y4m files)
    /// or a generated synthetic corpus
    Experiment {
        /// Directory of .y4m inputs; omit to use --synth-videos
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "26")]
        qps: Vec<u8>,
        #[arg(long, value_delimiter = ',', default_value = "0.3")]
        payloads: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "full,only8x8,tew")]
        schemes: Vec<String>,
        #[arg(long, default_value_t = 8)]
        synth_videos: usize,
        #[arg(long, default_value_t = 2)]
        synth_frames: usize,
        #[arg(long, default_value_t = 128)]
        synth_size: u32,
        #[arg(long, default_value_t = 20)]
        detector_repeats: u32,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a synthetic Y4M corpus for experiments
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        videos: usize,
        #[arg(long, default_value_t = 2)]
        frames: usize,
        #[arg(long, default_value_t = 128)]
        size: u32,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var("CUSTEGO_SEED").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0)
}

fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |k| (b >> k) & 1))
        .collect()
}

fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| chunk.iter().fold(0u8, |acc, &b| (acc << 1) | b) << (8 - chunk.len()))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Encode { video, output, qp } => {
            let qp = Qp::new(qp)?;
            let v = video.load()?;
            let coded: Vec<_> = v
                .frames
                .iter()
                .map(|f| encode_frame(f, qp).map(|(c, _)| c))
                .collect::<Result<_>>()?;
            let bytes = write_video(&coded)?;
            fs::write(&output, &bytes)?;
            let recons: Vec<_> = decode_video(&bytes)?.into_iter().map(|(_, f)| f).collect();
            let p = sequence_psnr(&v.frames, &recons)?;
            println!(
                "{}",
                json!({
                    "frames": v.frames.len(),
                    "width": v.width(),
                    "height": v.height(),
                    "qp": qp.value(),
                    "bytes": bytes.len(),
                    "psnr": p,
                })
            );
            eprintln!(
                "encoded {} frame(s) {}x{} at qp {} -> {} bytes, psnr {:.2} dB",
                v.frames.len(),
                v.width(),
                v.height(),
                qp.value(),
                bytes.len(),
                p
            );
        }
        Command::Decode { input, output } => {
            let bytes = fs::read(&input)?;
            let decoded = decode_video(&bytes)?;
            let frames: Vec<_> = decoded.iter().map(|(_, f)| f.clone()).collect();
            write_y4m(&output, &VideoSequence::new("decoded", frames.clone())?)?;
            println!(
                "{}",
                json!({
                    "frames": frames.len(),
                    "width": frames[0].width(),
                    "height": frames[0].height(),
                })
            );
            eprintln!("decoded {} frame(s) to {}", frames.len(), output.display());
        }
        Command::Embed {
            video,
            output,
            header_out,
            sideinfo_out,
            message_file,
            random_bits,
            qp,
            payload,
            scheme,
            h,
            seed,
        } => {
            let qp = Qp::new(qp)?;
            let scheme = Scheme::parse(&scheme)?;
            let seed = resolve_seed(seed);
            let v = video.load()?;
            let message = match (&message_file, random_bits) {
                (Some(path), None) => bytes_to_bits(&fs::read(path)?),
                (None, Some(n)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..n).map(|_| rng.gen_range(0..2u8)).collect()
                }
                (None, None) => Vec::new(),
                _ => unreachable!("clap conflicts_with"),
            };
            let params = default_params(h, seed)?;
            let pkg = match scheme {
                Scheme::Tew => tew_embed(&v, &message, qp)?,
                s => embed(&v, &message, payload, qp, s, &params)?,
            };
            fs::write(&output, &pkg.bitstream)?;
            fs::write(&header_out, serde_json::to_vec_pretty(&pkg.header).unwrap())?;
            if let Some(side) = &pkg.side_info {
                let path = sideinfo_out
                    .as_ref()
                    .ok_or_else(|| Error::invalid("full scheme needs --sideinfo-out"))?;
                fs::write(path, side)?;
            }
            println!(
                "{}",
                json!({
                    "scheme": pkg.header.scheme.as_str(),
                    "message_bits": pkg.header.message_len,
                    "carrier_counts": pkg.header.carrier_counts,
                    "bitstream_bytes": pkg.bitstream.len(),
                    "side_info_bytes": pkg.side_info.as_ref().map(|s| s.len()),
                })
            );
            eprintln!(
                "embedded {} bit(s) via {} into {} frame(s)",
                pkg.header.message_len,
                pkg.header.scheme.as_str(),
                v.frames.len()
            );
        }
        Command::Extract { input, header, sideinfo, output } => {
            let header: StegoHeader = serde_json::from_slice(&fs::read(&header)?)
                .map_err(|e| Error::format(format!("header: {e}")))?;
            let side_info = sideinfo.map(fs::read).transpose()?;
            let pkg = StegoPackage { bitstream: fs::read(&input)?, header, side_info };
            let bits = extract(&pkg)?;
            fs::write(&output, bits_to_bytes(&bits))?;
            println!("{}", json!({ "message_bits": bits.len() }));
            eprintln!("recovered {} bit(s) to {}", bits.len(), output.display());
        }
        Command::Analyze { video, qp, csv_out } => {
            let qp = Qp::new(qp)?;
            let v = video.load()?;
            let coded: Vec<_> = v
                .frames
                .iter()
                .map(|f| encode_frame(f, qp).map(|(c, _)| c))
                .collect::<Result<_>>()?;
            let bytes = write_video(&coded)?;
            let features = per_frame_features(&bytes, None)?;
            let report = analyze_restoration(&v, qp)?;
            if let Some(path) = &csv_out {
                let rows: Vec<_> = features
                    .iter()
                    .enumerate()
                    .map(|(i, f)| (v.name.clone(), i, *f))
                    .collect();
                fs::write(path, features_csv(&rows))?;
            }
            println!(
                "{}",
                json!({ "features": features, "restoration": report })
            );
            eprintln!(
                "analyzed {} frame(s): {:.1}% structures unchanged, mean bsim {:.3}",
                v.frames.len(),
                100.0 * report.fraction_structure_unchanged,
                report.mean_bsim
            );
        }
        Command::Experiment {
            corpus,
            out,
            qps,
            payloads,
            schemes,
            synth_videos,
            synth_frames,
            synth_size,
            detector_repeats,
            seed,
        } => {
            let seed = resolve_seed(seed);
            let schemes: Vec<Scheme> =
                schemes.iter().map(|s| Scheme::parse(s)).collect::<Result<_>>()?;
            let videos = match &corpus {
                Some(dir) => load_corpus_dir(dir)?,
                None => synth_corpus(synth_videos, synth_frames, synth_size, synth_size, seed)?,
            };
            let results =
                run_experiment(&videos, &qps, &payloads, &schemes, seed, detector_repeats)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("metrics.csv"), results.metrics_csv())?;
            fs::write(out.join("detectors.csv"), results.detectors_csv())?;
            fs::write(out.join("summary.json"), serde_json::to_vec_pretty(&results).unwrap())?;
            println!("{}", serde_json::to_string(&results.detectors).unwrap());
            eprintln!(
                "experiment over {} video(s), {} grid point(s); tables in {}",
                videos.len(),
                results.detectors.len(),
                out.display()
            );
        }
        Command::Synth { out, videos, frames, size, seed } => {
            let seed = resolve_seed(seed);
            fs::create_dir_all(&out)?;
            let corpus = synth_corpus(videos, frames, size, size, seed)?;
            for v in &corpus {
                write_y4m(&out.join(format!("{}.y4m", v.name)), v)?;
            }
            println!("{}", json!({ "videos": videos, "frames": frames, "size": size }));
            eprintln!("wrote {videos} synthetic video(s) to {}", out.display());
        }
    }
    Ok(())
}

fn default_params(h: u8, seed: u64) -> Result<StcParams> {
    if h == 7 {
        return Ok(StcParams::default_production(seed));
    }
    // repeating 1,1,0 pattern with forced endpoints, any h in range
    let mut hhat: Vec<u8> = (0..h).map(|i| u8::from(i % 3 != 2)).collect();
    if let Some(last) = hhat.last_mut() {
        *last = 1;
    }
    StcParams::new(h, hhat, seed)
}

fn load_corpus_dir(dir: &Path) -> Result<Vec<VideoSequence>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "y4m"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!("no .y4m files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let mut v = load_video(p, VideoFormat::Y4m)?;
            v.frames = v.frames.iter().map(pad_to_ctu).collect();
            Ok(v)
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
