//! Newline-delimited JSON session protocol and a threaded TCP server.
//!
//! On connect the server sends one `state-snapshot`. Clients then stream
//! `frame` messages (the landmark record with a `type` tag) and occasional
//! `command`s; every frame is answered by the events it produced, in order.
//! A client may announce its protocol version with `hello`; a mismatch is
//! reported and the connection closed. Any other malformed line gets an
//! `error` reply and the connection stays open.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use serde::{Deserialize, Serialize};

use crate::engine::{EngineConfig, InteractionEvent, Mode, Session};
use crate::error::Result;
use crate::geometry::LandmarkFrame;
use crate::musicspace::{emotion_color, Emotion, MusicSpace};
use crate::nets::Checkpoint;
use crate::scaling::UnitBounds;

pub const PROTOCOL_VERSION: u32 = 1;
/// Tracks shipped in a snapshot before subsampling kicks in.
pub const SNAPSHOT_TRACK_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
#[allow(clippy::large_enum_variant)]
pub enum ClientMessage {
    Hello { version: u32 },
    Frame(LandmarkFrame),
    Command(Command),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Reset,
    Calibrate { latents: Vec<[f64; 2]> },
    SetConfig { config: EngineConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ServerMessage {
    StateSnapshot(Snapshot),
    Event { event: InteractionEvent },
    Error { code: ErrorCode, text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCode {
    Malformed,
    VersionMismatch,
    InvalidFrame,
    BadCommand,
    Engine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotTrack {
    pub track_id: String,
    pub title: String,
    pub unit: [f64; 2],
    pub emotion: Emotion,
    pub value: f64,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotCenter {
    pub emotion: Emotion,
    pub unit: [f64; 2],
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub mode: Mode,
    pub frames: usize,
    pub config: EngineConfig,
    pub calibration: Option<UnitBounds>,
    /// Size of the full catalog; `tracks` may be a subsample.
    pub total_tracks: usize,
    pub tracks: Vec<SnapshotTrack>,
    pub centers: Vec<SnapshotCenter>,
}

impl ServerMessage {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }

    fn error(code: ErrorCode, text: impl Into<String>) -> Self {
        ServerMessage::Error { code, text: text.into() }
    }
}

impl ClientMessage {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("client messages always serialize")
    }
}

/// Evenly spaced indices, `limit` of `len`, always including the first.
fn subsample(len: usize, limit: usize) -> Vec<usize> {
    if len <= limit {
        return (0..len).collect();
    }
    (0..limit).map(|i| i * len / limit).collect()
}

pub fn snapshot(space: &MusicSpace, session: &Session) -> Snapshot {
    let tracks = subsample(space.tracks.len(), SNAPSHOT_TRACK_LIMIT)
        .into_iter()
        .map(|i| {
            let t = &space.tracks[i];
            let color =
                emotion_color(t.dominant, t.dominant_value.clamp(0.0, 1.0)).map(|c| c.to_hex()).unwrap_or_default();
            SnapshotTrack {
                track_id: t.track_id.clone(),
                title: t.title.clone(),
                unit: t.unit,
                emotion: t.dominant,
                value: t.dominant_value,
                color,
            }
        })
        .collect();
    let centers = Emotion::ALL
        .iter()
        .zip(space.centers.iter())
        .filter_map(|(e, c)| {
            c.map(|unit| SnapshotCenter {
                emotion: *e,
                unit,
                color: emotion_color(*e, 1.0).expect("1 is in range").to_hex(),
            })
        })
        .collect();
    Snapshot {
        version: PROTOCOL_VERSION,
        mode: session.mode(),
        frames: session.frames(),
        config: *session.config(),
        calibration: session.calibration(),
        total_tracks: space.tracks.len(),
        tracks,
        centers,
    }
}

/// Frozen model and space shared by every connection.
#[derive(Debug, Clone)]
pub struct Shared {
    pub checkpoint: Arc<Checkpoint>,
    pub space: Arc<MusicSpace>,
    pub config: EngineConfig,
}

impl Shared {
    pub fn new(checkpoint: Checkpoint, space: MusicSpace, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Shared { checkpoint: Arc::new(checkpoint), space: Arc::new(space), config })
    }

    pub fn session(&self) -> Result<Session> {
        Session::for_model(self.config, &self.checkpoint.model, self.checkpoint.calibration)
    }
}

fn send<W: Write>(writer: &mut W, message: &ServerMessage) -> std::io::Result<()> {
    writer.write_all(message.to_json_line().as_bytes())?;
    writer.write_all(b"\n")
}

/// Serve one client over any line-oriented duplex pair. Returns when the
/// client disconnects or a version mismatch closes the session.
pub fn handle_connection<R: BufRead, W: Write>(reader: R, mut writer: W, shared: &Shared) -> std::io::Result<()> {
    let mut session = match shared.session() {
        Ok(s) => s,
        Err(e) => {
            send(&mut writer, &ServerMessage::error(ErrorCode::Engine, e.to_string()))?;
            return writer.flush();
        }
    };
    send(&mut writer, &ServerMessage::StateSnapshot(snapshot(&shared.space, &session)))?;
    writer.flush()?;

    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let message: ClientMessage = match serde_json::from_str(&line) {
            Ok(m) => m,
            Err(e) => {
                let tagged_frame = serde_json::from_str::<serde_json::Value>(&line)
                    .is_ok_and(|v| v.get("type").and_then(|t| t.as_str()) == Some("frame"));
                let code = if tagged_frame { ErrorCode::InvalidFrame } else { ErrorCode::Malformed };
                send(&mut writer, &ServerMessage::error(code, e.to_string()))?;
                writer.flush()?;
                continue;
            }
        };
        match message {
            ClientMessage::Hello { version } if version != PROTOCOL_VERSION => {
                send(
                    &mut writer,
                    &ServerMessage::error(
                        ErrorCode::VersionMismatch,
                        format!("server speaks protocol {PROTOCOL_VERSION}, client {version}"),
                    ),
                )?;
                return writer.flush();
            }
            ClientMessage::Hello { .. } => {}
            ClientMessage::Frame(frame) => match session.push_frame(&frame, &shared.checkpoint.model, &shared.space) {
                Ok(events) => {
                    for event in events {
                        send(&mut writer, &ServerMessage::Event { event })?;
                    }
                }
                Err(e) => send(&mut writer, &ServerMessage::error(ErrorCode::Engine, e.to_string()))?,
            },
            ClientMessage::Command(command) => {
                let outcome = match command {
                    Command::Reset => {
                        session.reset();
                        Ok(())
                    }
                    Command::Calibrate { latents } => session.calibrate(&latents).map(|_| ()),
                    Command::SetConfig { config } => session.set_config(config),
                };
                let reply = match outcome {
                    Ok(()) => ServerMessage::StateSnapshot(snapshot(&shared.space, &session)),
                    Err(e) => ServerMessage::error(ErrorCode::BadCommand, e.to_string()),
                };
                send(&mut writer, &reply)?;
            }
        }
        writer.flush()?;
    }
    Ok(())
}

fn handle_stream(stream: TcpStream, shared: &Shared) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    handle_connection(reader, BufWriter::new(stream), shared)
}

/// A bound listener; call [`Server::run`] to accept clients, one thread each.
pub struct Server {
    listener: TcpListener,
    shared: Shared,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, shared: Shared) -> std::io::Result<Self> {
        Ok(Server { listener: TcpListener::bind(addr)?, shared })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accept connections forever.
    pub fn run(self) -> std::io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let shared = self.shared.clone();
            thread::spawn(move || {
                let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_else(|_| "?".into());
                log::info!("client {peer} connected");
                match handle_stream(stream, &shared) {
                    Ok(()) => log::info!("client {peer} disconnected"),
                    Err(e) => log::warn!("client {peer}: {e}"),
                }
            });
        }
        Ok(())
    }

    /// Run the accept loop on a background thread.
    pub fn spawn(self) -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
        let addr = self.local_addr()?;
        Ok((addr, thread::spawn(move || self.run())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_message_is_an_inline_landmark_record() {
        let frame = LandmarkFrame::new(0.25, [[0.5, 0.25, -0.125]; 21], "cam0").unwrap();
        let msg = ClientMessage::Frame(frame.clone());
        let line = msg.to_json_line();
        assert!(line.starts_with(r#"{"type":"frame","t":0.25,"hand":[[0.5,0.25,-0.125]"#), "{line}");
        assert_eq!(serde_json::from_str::<ClientMessage>(&line).unwrap(), msg);
        // A bare stream record is accepted once tagged.
        let tagged = format!(r#"{{"type":"frame",{}"#, &frame.to_json_line()[1..]);
        assert_eq!(serde_json::from_str::<ClientMessage>(&tagged).unwrap(), msg);
    }

    #[test]
    fn command_wire_format() {
        let c: ClientMessage = serde_json::from_str(r#"{"type":"command","command":"reset"}"#).unwrap();
        assert_eq!(c, ClientMessage::Command(Command::Reset));
        let c: ClientMessage =
            serde_json::from_str(r#"{"type":"command","command":"set-config","config":{"cooldown":0.25}}"#).unwrap();
        let ClientMessage::Command(Command::SetConfig { config }) = c else { panic!() };
        assert_eq!(config.cooldown, 0.25);
        assert_eq!(config.consecutive_windows, 3);
        assert!(serde_json::from_str::<ClientMessage>(r#"{"type":"command","command":"explode"}"#).is_err());
    }

    #[test]
    fn subsample_is_even_and_bounded() {
        assert_eq!(subsample(5, 10), vec![0, 1, 2, 3, 4]);
        let s = subsample(5000, 2000);
        assert_eq!(s.len(), 2000);
        assert_eq!(s[0], 0);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(*s.last().unwrap() < 5000);
    }

    #[test]
    fn error_message_shape() {
        let e = ServerMessage::error(ErrorCode::VersionMismatch, "nope");
        assert_eq!(e.to_json_line(), r#"{"type":"error","code":"version-mismatch","text":"nope"}"#);
    }
}
