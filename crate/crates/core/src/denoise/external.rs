//! Out-of-process denoiser driven through files.
//!
//! Protocol, per call:
//! 1. `workdir/in.png`: 16-bit RGB PNG of the input,
//! 2. `workdir/sigma.txt`: the noise level as an ASCII decimal in `[0, 1]` units,
//! 3. run `<command> <workdir>` and wait for exit code 0,
//! 4. read `workdir/out.png`: 16-bit PNG with the input's dimensions.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use super::DenoiseError;
use crate::raster::{load_image, save_image_16, ImageRgb};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

/// Environment variable naming the base directory for exchange folders.
pub const WORKDIR_ENV: &str = "RETINEX_WORKDIR";

fn workdir_lock(dir: &Path) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>> = OnceLock::new();
    let mut map = LOCKS
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    map.entry(dir.to_path_buf()).or_default().clone()
}

/// Picks a fresh exchange directory under `$RETINEX_WORKDIR` (or the system
/// temp directory).
pub fn fresh_workdir() -> PathBuf {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let base = std::env::var_os(WORKDIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    base.join(format!(
        "pnp-retinex-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ))
}

/// Runs one exchange round. Calls sharing a `workdir` are serialized.
pub fn external_denoise(
    command: &str,
    workdir: &Path,
    img: &ImageRgb,
    noise_level: f64,
    timeout: Duration,
) -> Result<ImageRgb, DenoiseError> {
    let mut parts = command.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| DenoiseError::InvalidSpec("external command is empty".into()))?;
    let args: Vec<&str> = parts.collect();

    let lock = workdir_lock(workdir);
    let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());

    std::fs::create_dir_all(workdir).map_err(DenoiseError::Io)?;
    let in_path = workdir.join("in.png");
    let out_path = workdir.join("out.png");
    if out_path.exists() {
        std::fs::remove_file(&out_path).map_err(DenoiseError::Io)?;
    }
    save_image_16(img, &in_path)?;
    std::fs::write(workdir.join("sigma.txt"), format!("{noise_level}\n"))
        .map_err(DenoiseError::Io)?;

    let mut child = Command::new(program)
        .args(&args)
        .arg(workdir)
        .stdin(Stdio::null())
        .spawn()
        .map_err(|e| DenoiseError::Spawn {
            command: command.to_string(),
            source: e,
        })?;

    let started = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait().map_err(DenoiseError::Io)? {
            break status;
        }
        if started.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(DenoiseError::Timeout(timeout));
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    if !status.success() {
        return Err(DenoiseError::ExitStatus(status.code()));
    }
    if !out_path.exists() {
        return Err(DenoiseError::MissingOutput(out_path));
    }
    let out = load_image(&out_path)?;
    if out.dims() != img.dims() {
        return Err(DenoiseError::DimensionMismatch {
            expected: img.dims(),
            actual: out.dims(),
        });
    }
    Ok(out)
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::raster::ImagePlane;
    use std::os::unix::fs::PermissionsExt;

    fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
        path
    }

    fn sample() -> ImageRgb {
        ImageRgb::from_fn(5, 4, |r, c| [r as f64 / 5.0, c as f64 / 4.0, 0.123456])
    }

    #[test]
    fn pass_through_stub() {
        let dir = tempfile::tempdir().unwrap();
        let stub = script(dir.path(), "copy.sh", r#"cp "$1/in.png" "$1/out.png""#);
        let work = dir.path().join("x");
        let img = sample();
        let out =
            external_denoise(stub.to_str().unwrap(), &work, &img, 0.1, DEFAULT_TIMEOUT).unwrap();
        assert!(out.max_abs_diff(&img) <= 0.5 / 65535.0 + 1e-12);
        let sigma = std::fs::read_to_string(work.join("sigma.txt")).unwrap();
        assert_eq!(sigma.trim().parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn failing_command_reports_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let stub = script(dir.path(), "fail.sh", "exit 3");
        let err = external_denoise(
            stub.to_str().unwrap(),
            &dir.path().join("w"),
            &sample(),
            0.1,
            DEFAULT_TIMEOUT,
        )
        .unwrap_err();
        assert!(matches!(err, DenoiseError::ExitStatus(Some(3))));
    }

    #[test]
    fn missing_output_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let stub = script(dir.path(), "noop.sh", "true");
        let err = external_denoise(
            stub.to_str().unwrap(),
            &dir.path().join("w"),
            &sample(),
            0.1,
            DEFAULT_TIMEOUT,
        )
        .unwrap_err();
        assert!(matches!(err, DenoiseError::MissingOutput(_)));
    }

    #[test]
    fn slow_command_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let stub = script(dir.path(), "slow.sh", "sleep 5");
        let err = external_denoise(
            stub.to_str().unwrap(),
            &dir.path().join("w"),
            &sample(),
            0.1,
            Duration::from_millis(100),
        )
        .unwrap_err();
        assert!(matches!(err, DenoiseError::Timeout(_)));
    }

    #[test]
    fn sixteen_bit_exchange_error_bound() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.png");
        let img = ImageRgb::gray(ImagePlane::from_fn(7, 9, |r, c| {
            ((r * 31 + c * 17) % 97) as f64 / 97.0
        }));
        save_image_16(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert!(back.max_abs_diff(&img) <= 1.0 / 65535.0 + f64::EPSILON);
    }
}
