//! WebSocket bridge for the control UI.
//!
//! A small RFC 6455 server on `std::net`: one reader thread per client, one
//! broadcaster thread that serializes each snapshot once and writes the same
//! bytes to every client. Commands go through [`RuntimeHandle::request`], the
//! same queue OSC events use. The JSON schema is in `docs/ws-schema.md`.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use jamloop_core::runtime::{RequestError, RuntimeHandle};
use jamloop_core::{ControlCommand, InboundEvent, Pitch, Velocity};
use serde_json::{json, Value};

use crate::sha1::sha1;

pub const SCHEMA_VERSION: u64 = 1;
/// Snapshots go out at most this often.
pub const BROADCAST_INTERVAL: Duration = Duration::from_millis(50);
const POLL: Duration = Duration::from_millis(10);
const MAX_HEADER: usize = 8 * 1024;
const MAX_MESSAGE: usize = 1 << 20;
const WRITE_TIMEOUT: Duration = Duration::from_millis(250);
const REQUEST_TIMEOUT: Duration = Duration::from_secs(1);
const GUID: &str = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

pub fn accept_key(client_key: &str) -> String {
    BASE64.encode(sha1(format!("{}{GUID}", client_key.trim()).as_bytes()))
}

// ---- handshake -------------------------------------------------------------

/// Reads an HTTP upgrade request and returns the `Sec-WebSocket-Key`.
pub fn read_upgrade_request<R: BufRead>(r: &mut R) -> io::Result<String> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_owned());
    let mut total = 0;
    let mut first = true;
    let (mut key, mut upgrade, mut version_ok) = (None, false, false);
    loop {
        let mut line = String::new();
        let n = r.read_line(&mut line)?;
        if n == 0 {
            return Err(bad("connection closed during handshake"));
        }
        total += n;
        if total > MAX_HEADER {
            return Err(bad("handshake headers too large"));
        }
        let line = line.trim_end();
        if first {
            if !line.starts_with("GET ") {
                return Err(bad("expected a GET request"));
            }
            first = false;
            continue;
        }
        if line.is_empty() {
            break;
        }
        let Some((name, value)) = line.split_once(':') else { continue };
        let value = value.trim();
        match name.trim().to_ascii_lowercase().as_str() {
            "upgrade" => upgrade = value.eq_ignore_ascii_case("websocket"),
            "sec-websocket-key" => key = Some(value.to_owned()),
            "sec-websocket-version" => version_ok = value == "13",
            _ => {}
        }
    }
    if !upgrade {
        return Err(bad("not a websocket upgrade"));
    }
    if !version_ok {
        return Err(bad("unsupported websocket version"));
    }
    key.ok_or_else(|| bad("missing Sec-WebSocket-Key"))
}

fn write_upgrade_response<W: Write>(w: &mut W, key: &str) -> io::Result<()> {
    write!(
        w,
        "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: {}\r\n\r\n",
        accept_key(key)
    )?;
    w.flush()
}

// ---- frames ----------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Opcode {
    Continuation,
    Text,
    Binary,
    Close,
    Ping,
    Pong,
}

impl Opcode {
    fn from_bits(b: u8) -> Option<Opcode> {
        Some(match b {
            0x0 => Opcode::Continuation,
            0x1 => Opcode::Text,
            0x2 => Opcode::Binary,
            0x8 => Opcode::Close,
            0x9 => Opcode::Ping,
            0xA => Opcode::Pong,
            _ => return None,
        })
    }

    fn bits(self) -> u8 {
        match self {
            Opcode::Continuation => 0x0,
            Opcode::Text => 0x1,
            Opcode::Binary => 0x2,
            Opcode::Close => 0x8,
            Opcode::Ping => 0x9,
            Opcode::Pong => 0xA,
        }
    }

    fn is_control(self) -> bool {
        matches!(self, Opcode::Close | Opcode::Ping | Opcode::Pong)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub fin: bool,
    pub opcode: Opcode,
    pub payload: Vec<u8>,
}

fn protocol_error(m: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, m.to_owned())
}

/// Reads one frame. `require_mask` is true on the server side.
pub fn read_frame<R: Read>(r: &mut R, require_mask: bool) -> io::Result<Frame> {
    let mut head = [0u8; 2];
    r.read_exact(&mut head)?;
    if head[0] & 0x70 != 0 {
        return Err(protocol_error("reserved bits set"));
    }
    let fin = head[0] & 0x80 != 0;
    let opcode = Opcode::from_bits(head[0] & 0x0F).ok_or_else(|| protocol_error("unknown opcode"))?;
    let masked = head[1] & 0x80 != 0;
    if masked != require_mask {
        return Err(protocol_error(if require_mask {
            "client frames must be masked"
        } else {
            "server frames must not be masked"
        }));
    }
    let len = match head[1] & 0x7F {
        126 => {
            let mut b = [0u8; 2];
            r.read_exact(&mut b)?;
            u64::from(u16::from_be_bytes(b))
        }
        127 => {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            u64::from_be_bytes(b)
        }
        n => u64::from(n),
    };
    if opcode.is_control() && (len > 125 || !fin) {
        return Err(protocol_error("malformed control frame"));
    }
    if len > MAX_MESSAGE as u64 {
        return Err(protocol_error("frame too large"));
    }
    let mut mask = [0u8; 4];
    if masked {
        r.read_exact(&mut mask)?;
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    if masked {
        for (i, b) in payload.iter_mut().enumerate() {
            *b ^= mask[i % 4];
        }
    }
    Ok(Frame { fin, opcode, payload })
}

/// Encodes one final frame. A `mask` is applied when given (client side).
pub fn encode_frame(opcode: Opcode, payload: &[u8], mask: Option<[u8; 4]>) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 14);
    out.push(0x80 | opcode.bits());
    let mask_bit = if mask.is_some() { 0x80 } else { 0 };
    match payload.len() {
        n @ 0..=125 => out.push(mask_bit | n as u8),
        n @ 126..=0xFFFF => {
            out.push(mask_bit | 126);
            out.extend_from_slice(&(n as u16).to_be_bytes());
        }
        n => {
            out.push(mask_bit | 127);
            out.extend_from_slice(&(n as u64).to_be_bytes());
        }
    }
    match mask {
        Some(m) => {
            out.extend_from_slice(&m);
            out.extend(payload.iter().enumerate().map(|(i, b)| b ^ m[i % 4]));
        }
        None => out.extend_from_slice(payload),
    }
    out
}

/// A complete data message or a control frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Text(String),
    Binary(Vec<u8>),
    Ping(Vec<u8>),
    Pong(Vec<u8>),
    Close(Option<u16>),
}

/// Reads whole messages, reassembling fragments. Control frames that arrive
/// between fragments are returned as they come.
pub struct MessageReader<R> {
    inner: R,
    require_mask: bool,
    partial: Option<(Opcode, Vec<u8>)>,
}

impl<R: Read> MessageReader<R> {
    pub fn new(inner: R, require_mask: bool) -> Self {
        MessageReader { inner, require_mask, partial: None }
    }

    pub fn get_ref(&self) -> &R {
        &self.inner
    }

    pub fn get_mut(&mut self) -> &mut R {
        &mut self.inner
    }

    pub fn next_message(&mut self) -> io::Result<Message> {
        loop {
            let f = read_frame(&mut self.inner, self.require_mask)?;
            match f.opcode {
                Opcode::Ping => return Ok(Message::Ping(f.payload)),
                Opcode::Pong => return Ok(Message::Pong(f.payload)),
                Opcode::Close => {
                    let code = (f.payload.len() >= 2).then(|| u16::from_be_bytes([f.payload[0], f.payload[1]]));
                    return Ok(Message::Close(code));
                }
                Opcode::Text | Opcode::Binary => {
                    if self.partial.is_some() {
                        return Err(protocol_error("new message inside a fragmented one"));
                    }
                    self.partial = Some((f.opcode, f.payload));
                }
                Opcode::Continuation => match self.partial.as_mut() {
                    Some((_, buf)) => {
                        if buf.len() + f.payload.len() > MAX_MESSAGE {
                            return Err(protocol_error("message too large"));
                        }
                        buf.extend_from_slice(&f.payload);
                    }
                    None => return Err(protocol_error("continuation without a message")),
                },
            }
            if f.fin {
                let (op, buf) = self.partial.take().expect("data frame seen");
                return Ok(match op {
                    Opcode::Text => {
                        Message::Text(String::from_utf8(buf).map_err(|_| protocol_error("text is not UTF-8"))?)
                    }
                    _ => Message::Binary(buf),
                });
            }
        }
    }
}

// ---- commands --------------------------------------------------------------

/// Parses a client command. The error text goes back in an error frame.
pub fn parse_command(text: &str) -> Result<InboundEvent, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("expected a JSON object")?;
    match obj.get("v").and_then(Value::as_u64) {
        Some(SCHEMA_VERSION) => {}
        Some(v) => return Err(format!("unsupported schema version {v}")),
        None => return Err("missing schema version \"v\"".into()),
    }
    let cmd = obj.get("cmd").and_then(Value::as_str).ok_or("missing \"cmd\"")?;
    let int = |field: &str| -> Result<i64, String> {
        obj.get(field).and_then(Value::as_i64).ok_or_else(|| format!("`{cmd}` needs integer \"{field}\""))
    };
    match cmd {
        "note_on" => {
            let pitch = Pitch::new(int("pitch")?).map_err(|e| e.to_string())?;
            let velocity = match obj.get("velocity") {
                None => Velocity::DEFAULT,
                Some(_) => Velocity::new(int("velocity")?).map_err(|e| e.to_string())?,
            };
            Ok(InboundEvent::NoteOn { pitch, velocity })
        }
        "note_off" => Ok(InboundEvent::NoteOff { pitch: Pitch::new(int("pitch")?).map_err(|e| e.to_string())? }),
        _ => serde_json::from_value::<ControlCommand>(value.clone())
            .map(InboundEvent::from)
            .map_err(|e| format!("bad `{cmd}` command: {e}")),
    }
}

fn reply(kind: &str, id: Option<&Value>, extra: Value) -> String {
    let mut v = json!({ "v": SCHEMA_VERSION, "type": kind });
    if let Some(id) = id {
        v["id"] = id.clone();
    }
    if let (Some(o), Value::Object(e)) = (v.as_object_mut(), extra) {
        o.extend(e);
    }
    v.to_string()
}

/// Handles one text message and returns the reply to send.
pub fn handle_text(handle: &RuntimeHandle, text: &str) -> String {
    let id = serde_json::from_str::<Value>(text).ok().and_then(|v| v.get("id").cloned());
    let cmd = serde_json::from_str::<Value>(text).ok().and_then(|v| v.get("cmd").cloned()).unwrap_or(Value::Null);
    match parse_command(text) {
        Err(message) => reply("error", id.as_ref(), json!({ "cmd": cmd, "message": message })),
        Ok(event) => match handle.request(event, REQUEST_TIMEOUT) {
            Ok(()) => reply("ack", id.as_ref(), json!({ "cmd": cmd })),
            Err(RequestError::Rejected(e)) => {
                reply("error", id.as_ref(), json!({ "cmd": cmd, "message": e.to_string() }))
            }
            Err(RequestError::Stopped) => {
                reply("error", id.as_ref(), json!({ "cmd": cmd, "message": "engine is not running" }))
            }
        },
    }
}

// ---- server ----------------------------------------------------------------

struct Client {
    id: u64,
    out: Mutex<TcpStream>,
    /// Set until the client has received its first snapshot.
    fresh: AtomicBool,
}

impl Client {
    fn send(&self, opcode: Opcode, payload: &[u8]) -> io::Result<()> {
        let mut s = self.out.lock().unwrap_or_else(|e| e.into_inner());
        s.write_all(&encode_frame(opcode, payload, None))
    }
}

#[derive(Default)]
struct Shared {
    clients: Mutex<Vec<Arc<Client>>>,
    stop: AtomicBool,
    next_id: AtomicU64,
    broadcasts: AtomicU64,
}

impl Shared {
    fn remove(&self, id: u64) {
        let mut cs = self.clients.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(i) = cs.iter().position(|c| c.id == id) {
            let c = cs.swap_remove(i);
            let _ = c.out.lock().unwrap_or_else(|e| e.into_inner()).shutdown(Shutdown::Both);
        }
    }
}

pub struct WsServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl WsServer {
    pub fn spawn(listener: TcpListener, handle: RuntimeHandle) -> io::Result<WsServer> {
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let shared = Arc::new(Shared::default());
        let acceptor = {
            let (shared, handle) = (Arc::clone(&shared), handle.clone());
            thread::Builder::new().name("ws-accept".into()).spawn(move || accept_loop(listener, shared, handle))?
        };
        let broadcaster = {
            let shared = Arc::clone(&shared);
            thread::Builder::new().name("ws-broadcast".into()).spawn(move || broadcast_loop(shared, handle))?
        };
        Ok(WsServer { addr, shared, threads: vec![acceptor, broadcaster] })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn client_count(&self) -> usize {
        self.shared.clients.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    /// Snapshot broadcasts sent so far (each counts once however many
    /// clients received it).
    pub fn broadcasts(&self) -> u64 {
        self.shared.broadcasts.load(Ordering::Relaxed)
    }

    pub fn stop(&mut self) {
        self.shared.stop.store(true, Ordering::Release);
        let ids: Vec<u64> =
            self.shared.clients.lock().unwrap_or_else(|e| e.into_inner()).iter().map(|c| c.id).collect();
        for id in ids {
            self.shared.remove(id);
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for WsServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, handle: RuntimeHandle) {
    while !shared.stop.load(Ordering::Acquire) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let (shared, handle) = (Arc::clone(&shared), handle.clone());
                let spawned = thread::Builder::new().name(format!("ws-{peer}")).spawn(move || {
                    if let Err(e) = serve_client(stream, &shared, &handle) {
                        tracing::debug!(%peer, "websocket client ended: {e}");
                    }
                });
                if let Err(e) = spawned {
                    tracing::warn!("cannot start websocket client thread: {e}");
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                tracing::warn!("websocket accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

fn serve_client(stream: TcpStream, shared: &Shared, handle: &RuntimeHandle) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_write_timeout(Some(WRITE_TIMEOUT))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream.try_clone()?;
    let key = match read_upgrade_request(&mut reader) {
        Ok(k) => k,
        Err(e) => {
            let _ = write!(writer, "HTTP/1.1 400 Bad Request\r\nConnection: close\r\nContent-Length: 0\r\n\r\n");
            return Err(e);
        }
    };
    write_upgrade_response(&mut writer, &key)?;

    let id = shared.next_id.fetch_add(1, Ordering::Relaxed);
    let client = Arc::new(Client { id, out: Mutex::new(writer), fresh: AtomicBool::new(true) });
    shared.clients.lock().unwrap_or_else(|e| e.into_inner()).push(Arc::clone(&client));
    tracing::info!(id, "websocket client connected");
    let mut reader = MessageReader::new(reader, true);

    let result = (|| loop {
        match reader.next_message() {
            Ok(Message::Text(text)) => client.send(Opcode::Text, handle_text(handle, &text).as_bytes())?,
            Ok(Message::Binary(_)) => {
                let r = reply("error", None, json!({ "message": "binary messages are not supported" }));
                client.send(Opcode::Text, r.as_bytes())?
            }
            Ok(Message::Ping(p)) => client.send(Opcode::Pong, &p)?,
            Ok(Message::Pong(_)) => {}
            Ok(Message::Close(_)) => {
                let _ = client.send(Opcode::Close, &1000u16.to_be_bytes());
                return Ok(());
            }
            Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                let _ = client.send(Opcode::Close, &1002u16.to_be_bytes());
                return Err(e);
            }
            Err(e) => return Err(e),
        }
    })();
    shared.remove(id);
    tracing::info!(id, "websocket client disconnected");
    result
}

/// The text frame sent to clients for snapshot `seq`.
pub fn snapshot_message(seq: u64, state: &jamloop_core::EngineSnapshot) -> String {
    json!({ "v": SCHEMA_VERSION, "type": "snapshot", "seq": seq, "state": state }).to_string()
}

fn broadcast_loop(shared: Arc<Shared>, handle: RuntimeHandle) {
    let mut last: Option<(u64, Arc<String>)> = None;
    let mut last_sent = Instant::now() - BROADCAST_INTERVAL;
    while !shared.stop.load(Ordering::Acquire) {
        let (seq, snap) = handle.snapshot();
        let changed = last.as_ref().is_none_or(|(s, _)| *s != seq);
        let clients: Vec<Arc<Client>> = shared.clients.lock().unwrap_or_else(|e| e.into_inner()).clone();
        if changed && last_sent.elapsed() >= BROADCAST_INTERVAL {
            let text = Arc::new(snapshot_message(seq, &snap));
            for c in &clients {
                c.fresh.store(false, Ordering::Relaxed);
                if c.send(Opcode::Text, text.as_bytes()).is_err() {
                    shared.remove(c.id);
                }
            }
            shared.broadcasts.fetch_add(1, Ordering::Relaxed);
            last = Some((seq, text));
            last_sent = Instant::now();
        } else if let Some((_, text)) = &last {
            for c in clients.iter().filter(|c| c.fresh.swap(false, Ordering::Relaxed)) {
                if c.send(Opcode::Text, text.as_bytes()).is_err() {
                    shared.remove(c.id);
                }
            }
        }
        thread::sleep(POLL);
    }
}

// ---- client ----------------------------------------------------------------

/// Minimal blocking client, used by tests and tooling.
pub struct WsClient {
    reader: MessageReader<BufReader<TcpStream>>,
    writer: TcpStream,
    mask_counter: u32,
}

impl WsClient {
    pub fn connect(addr: SocketAddr) -> io::Result<WsClient> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let mut writer = stream.try_clone()?;
        let key = BASE64.encode(&sha1(format!("{addr}{:?}", Instant::now()).as_bytes())[..16]);
        write!(
            writer,
            "GET / HTTP/1.1\r\nHost: {addr}\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
        )?;
        let mut reader = BufReader::new(stream);
        let mut status = String::new();
        reader.read_line(&mut status)?;
        if !status.starts_with("HTTP/1.1 101") {
            return Err(protocol_error(&format!("upgrade refused: {}", status.trim())));
        }
        let mut accept = None;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line)?;
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((n, v)) = line.split_once(':') {
                if n.eq_ignore_ascii_case("sec-websocket-accept") {
                    accept = Some(v.trim().to_owned());
                }
            }
        }
        if accept.as_deref() != Some(accept_key(&key).as_str()) {
            return Err(protocol_error("bad Sec-WebSocket-Accept"));
        }
        Ok(WsClient { reader: MessageReader::new(reader, false), writer, mask_counter: 0x1234_5678 })
    }

    pub fn set_read_timeout(&self, d: Option<Duration>) -> io::Result<()> {
        self.reader.get_ref().get_ref().set_read_timeout(d)
    }

    pub fn send_raw(&mut self, opcode: Opcode, payload: &[u8]) -> io::Result<()> {
        self.mask_counter = self.mask_counter.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
        self.writer.write_all(&encode_frame(opcode, payload, Some(self.mask_counter.to_be_bytes())))
    }

    pub fn send_text(&mut self, text: &str) -> io::Result<()> {
        self.send_raw(Opcode::Text, text.as_bytes())
    }

    pub fn send_json(&mut self, v: &Value) -> io::Result<()> {
        self.send_text(&v.to_string())
    }

    pub fn recv(&mut self) -> io::Result<Message> {
        self.reader.next_message()
    }

    /// Next text message parsed as JSON, skipping pings and pongs.
    pub fn recv_json(&mut self) -> io::Result<Value> {
        loop {
            match self.recv()? {
                Message::Text(t) => return serde_json::from_str(&t).map_err(|e| protocol_error(&e.to_string())),
                Message::Close(_) => return Err(io::ErrorKind::ConnectionAborted.into()),
                _ => {}
            }
        }
    }

    /// Next reply (ack or error), skipping snapshots.
    pub fn recv_reply(&mut self) -> io::Result<Value> {
        loop {
            let v = self.recv_json()?;
            if v["type"] != "snapshot" {
                return Ok(v);
            }
        }
    }

    pub fn close(mut self) -> io::Result<()> {
        self.send_raw(Opcode::Close, &1000u16.to_be_bytes())?;
        self.writer.shutdown(Shutdown::Write)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use jamloop_core::Mode;
    use std::io::Cursor;

    #[test]
    fn accept_key_matches_the_protocol_example() {
        assert_eq!(accept_key("dGhlIHNhbXBsZSBub25jZQ=="), "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
    }

    #[test]
    fn upgrade_request_parsing() {
        let ok = "GET /ws HTTP/1.1\r\nHost: x\r\nUpgrade: WebSocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: abc==\r\nSec-WebSocket-Version: 13\r\n\r\n";
        assert_eq!(read_upgrade_request(&mut Cursor::new(ok)).unwrap(), "abc==");
        let plain = "GET / HTTP/1.1\r\nHost: x\r\n\r\n";
        assert!(read_upgrade_request(&mut Cursor::new(plain)).is_err());
        let post = "POST / HTTP/1.1\r\n\r\n";
        assert!(read_upgrade_request(&mut Cursor::new(post)).is_err());
    }

    #[test]
    fn frames_round_trip_at_each_length_encoding() {
        for len in [0usize, 1, 125, 126, 65535, 65536] {
            let payload: Vec<u8> = (0..len).map(|i| i as u8).collect();
            for mask in [None, Some([1, 2, 3, 4])] {
                let bytes = encode_frame(Opcode::Binary, &payload, mask);
                let f = read_frame(&mut Cursor::new(bytes), mask.is_some()).unwrap();
                assert_eq!(f, Frame { fin: true, opcode: Opcode::Binary, payload: payload.clone() });
            }
        }
    }

    #[test]
    fn server_rejects_unmasked_client_frames() {
        let bytes = encode_frame(Opcode::Text, b"hi", None);
        assert!(read_frame(&mut Cursor::new(bytes), true).is_err());
    }

    #[test]
    fn fragments_are_reassembled() {
        let m = [9, 9, 9, 9];
        let mut bytes = encode_frame(Opcode::Text, b"hel", Some(m));
        bytes[0] &= 0x7F;
        bytes.extend(encode_frame(Opcode::Ping, b"p", Some(m)));
        let mut cont = encode_frame(Opcode::Continuation, b"lo", Some(m));
        cont[0] = 0x80;
        bytes.extend(cont);
        let mut r = MessageReader::new(Cursor::new(bytes), true);
        // A control frame may arrive between fragments.
        assert_eq!(r.next_message().unwrap(), Message::Ping(b"p".to_vec()));
        assert_eq!(r.next_message().unwrap(), Message::Text("hello".into()));
    }

    #[test]
    fn commands_parse() {
        assert_eq!(parse_command(r#"{"v":1,"cmd":"play"}"#), Ok(ControlCommand::Play.into()));
        assert_eq!(
            parse_command(r#"{"v":1,"cmd":"mode","mode":"improv"}"#),
            Ok(ControlCommand::Mode { mode: Mode::Improv }.into())
        );
        assert_eq!(
            parse_command(r#"{"v":1,"cmd":"note_on","pitch":60}"#),
            Ok(InboundEvent::NoteOn { pitch: Pitch::MIDDLE_C, velocity: Velocity::DEFAULT })
        );
        assert_eq!(
            parse_command(r#"{"v":1,"cmd":"spec","bars":2,"numerator":7,"denominator":8}"#),
            Ok(ControlCommand::Spec { bars: 2, numerator: 7, denominator: 8 }.into())
        );
    }

    #[test]
    fn malformed_commands_explain_themselves() {
        for (text, needle) in [
            ("{", "invalid JSON"),
            ("[]", "object"),
            (r#"{"cmd":"play"}"#, "version"),
            (r#"{"v":2,"cmd":"play"}"#, "version 2"),
            (r#"{"v":1}"#, "cmd"),
            (r#"{"v":1,"cmd":"dance"}"#, "dance"),
            (r#"{"v":1,"cmd":"note_on","pitch":300}"#, "pitch"),
            (r#"{"v":1,"cmd":"mode","mode":"jazz"}"#, "mode"),
        ] {
            let e = parse_command(text).unwrap_err();
            assert!(e.contains(needle), "{text}: {e}");
        }
    }
}
