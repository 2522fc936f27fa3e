//! Episode serving over stdin/stdout or TCP (one thread per connection).

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::Arc;
use std::thread;

use anyhow::{bail, Context, Result};

use rvbench_core::episode::{Engine, ServerMessage, SystemClock};

use crate::files;

pub fn run(suite: &Path, listen: Option<&str>, replay: bool, results: Option<&Path>) -> Result<()> {
    let mut bundles = Vec::new();
    for (doc, bundle) in files::read_suite(suite)? {
        match bundle {
            Some(b) => bundles.push(b),
            None => bail!("task {} has no truth file; cannot grade it", doc.task_id),
        }
    }
    let engine = Arc::new(Engine::new(bundles, Arc::new(SystemClock::default())).with_replay(replay));
    let results = results.map(Path::to_path_buf);
    match listen {
        None => {
            let stdin = io::stdin();
            session(&engine, stdin.lock(), io::stdout().lock(), results.as_deref())?;
        }
        Some(addr) => {
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let stream = match stream {
                    Ok(s) => s,
                    Err(e) => {
                        eprintln!("connection failed: {e}");
                        continue;
                    }
                };
                let engine = engine.clone();
                let results = results.clone();
                thread::spawn(move || {
                    let reader = match stream.try_clone() {
                        Ok(r) => BufReader::new(r),
                        Err(e) => return eprintln!("connection failed: {e}"),
                    };
                    if let Err(e) = session(&engine, reader, stream, results.as_deref()) {
                        eprintln!("session ended: {e:#}");
                    }
                });
            }
        }
    }
    Ok(())
}

fn session<R: BufRead, W: Write>(engine: &Engine, reader: R, mut writer: W, results: Option<&Path>) -> Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = engine.handle_line(&line);
        writeln!(writer, "{response}")?;
        writer.flush()?;
        if let Some(dir) = results {
            if let Ok(ServerMessage::Result { result, .. }) = serde_json::from_str(&response) {
                files::write(&dir.join(format!("{}.json", result.episode_id)), &result)?;
            }
        }
    }
    Ok(())
}
