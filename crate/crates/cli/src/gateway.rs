//! Real-time NDJSON gateway over TCP.
//!
//! Clients receive one `state` message per tick and a `heartbeat` every
//! second. They may send `{"type":"cmd","u_thr":..,"u_rud":..}` lines to
//! drive the single externally controlled vehicle. Other message types are
//! ignored.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use barrier_fleet::sim::{spawn_leg, Leg, Policy, Scenario};
use barrier_fleet::ControlInput;
use serde::{Deserialize, Serialize};
use serde_json::Value;

const HEARTBEAT: Duration = Duration::from_secs(1);
const WRITE_TIMEOUT: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Command {
    pub u_thr: f64,
    pub u_rud: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VehicleMsg {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub u_thr: f64,
    pub u_rud: f64,
    pub h_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintMsg {
    pub ego: usize,
    pub contact: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    State { t: f64, leg: usize, vehicles: Vec<VehicleMsg>, constraints: Vec<ConstraintMsg> },
    Heartbeat { t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Cmd(Command),
    Ignored(String),
}

/// Parses one inbound line. Unknown `type`s are reported as `Ignored`.
pub fn parse_line(line: &str) -> Result<Inbound, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let kind = v.get("type").and_then(Value::as_str).ok_or("missing \"type\"")?.to_owned();
    if kind != "cmd" {
        return Ok(Inbound::Ignored(kind));
    }
    let c: Command = serde_json::from_value(v).map_err(|e| format!("bad cmd: {e}"))?;
    if !(c.u_thr.is_finite() && c.u_rud.is_finite()) {
        return Err("bad cmd: non-finite input".into());
    }
    Ok(Inbound::Cmd(c))
}

#[derive(Debug)]
pub enum GatewayError {
    Config(String),
    Io(std::io::Error),
    Sim(barrier_fleet::Error),
}

impl std::fmt::Display for GatewayError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GatewayError::Config(m) => f.write_str(m),
            GatewayError::Io(e) => write!(f, "gateway io: {e}"),
            GatewayError::Sim(e) => write!(f, "simulation failed: {e}"),
        }
    }
}

impl std::error::Error for GatewayError {}

impl From<std::io::Error> for GatewayError {
    fn from(e: std::io::Error) -> Self {
        GatewayError::Io(e)
    }
}

impl From<barrier_fleet::Error> for GatewayError {
    fn from(e: barrier_fleet::Error) -> Self {
        GatewayError::Sim(e)
    }
}

/// The id of the only `External` vehicle.
pub fn external_vehicle(scenario: &Scenario) -> Result<usize, GatewayError> {
    let ids: Vec<usize> =
        (0..scenario.joust.n_vehicles).filter(|&i| scenario.vehicle(i).policy == Policy::External).collect();
    match ids.as_slice() {
        [id] => Ok(*id),
        _ => Err(GatewayError::Config(format!("serving needs exactly one external vehicle, found {}", ids.len()))),
    }
}

fn spawn_reader(stream: TcpStream, tx: Sender<Command>) {
    let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
    thread::spawn(move || {
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            match parse_line(&line) {
                Ok(Inbound::Cmd(c)) => {
                    if tx.send(c).is_err() {
                        break;
                    }
                }
                Ok(Inbound::Ignored(kind)) => log::debug!("{peer}: ignoring message type {kind:?}"),
                Err(e) => log::warn!("{peer}: malformed line: {e}"),
            }
        }
        log::info!("{peer}: disconnected");
    });
}

struct Clients {
    listener: TcpListener,
    streams: Vec<TcpStream>,
    tx: Sender<Command>,
}

impl Clients {
    fn accept(&mut self) {
        loop {
            match self.listener.accept() {
                Ok((stream, addr)) => {
                    log::info!("{addr}: connected");
                    let setup = stream
                        .set_nonblocking(false)
                        .and_then(|_| stream.set_write_timeout(Some(WRITE_TIMEOUT)))
                        .and_then(|_| stream.set_nodelay(true))
                        .and_then(|_| stream.try_clone());
                    match setup {
                        Ok(reader) => {
                            spawn_reader(reader, self.tx.clone());
                            self.streams.push(stream);
                        }
                        Err(e) => log::warn!("{addr}: dropped: {e}"),
                    }
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => break,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    break;
                }
            }
        }
    }

    fn broadcast(&mut self, msg: &Outbound) {
        let mut line = serde_json::to_string(msg).expect("outbound messages serialize");
        line.push('\n');
        self.streams.retain_mut(|s| s.write_all(line.as_bytes()).is_ok());
    }
}

fn state_message(leg: &Leg<'_>, leg_index: usize, t: f64) -> Outbound {
    let vehicles = leg
        .last_ticks()
        .iter()
        .map(|r| VehicleMsg {
            id: r.vehicle_id,
            x: r.state.x,
            y: r.state.y,
            theta: r.state.theta,
            u_thr: r.u_safe.u_thr,
            u_rud: r.u_safe.u_rud,
            h_min: r.min_h,
        })
        .collect();
    let constraints = leg.barriers().iter().map(|b| ConstraintMsg { ego: b.ego, contact: b.contact, h: b.h }).collect();
    Outbound::State { t, leg: leg_index, vehicles, constraints }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServeOptions {
    /// Stop after this many legs.
    pub max_legs: Option<usize>,
}

/// Runs legs back to back in real time until `shutdown` is set.
///
/// The external vehicle keeps its pose from one leg to the next; everyone
/// else respawns on the circle.
pub fn serve(
    scenario: &Scenario,
    listener: TcpListener,
    shutdown: Arc<AtomicBool>,
    opts: ServeOptions,
) -> Result<(), GatewayError> {
    let ext = external_vehicle(scenario)?;
    listener.set_nonblocking(true)?;
    let (tx, rx): (Sender<Command>, Receiver<Command>) = mpsc::channel();
    let mut clients = Clients { listener, streams: Vec::new(), tx };
    let dt = scenario.joust.dt;
    let period = Duration::from_secs_f64(dt);

    let mut leg_index = 0;
    let mut leg = Leg::new(scenario, leg_index);
    let mut command = ControlInput::zero();
    let mut ticks: u64 = 0;
    let mut next = Instant::now();
    let mut last_beat = Instant::now();

    while !shutdown.load(Ordering::SeqCst) {
        clients.accept();
        while let Ok(c) = rx.try_recv() {
            command = ControlInput::new(c.u_thr, c.u_rud);
        }
        leg.command(ext, command)?;
        leg.step()?;
        ticks += 1;
        let t = ticks as f64 * dt;
        clients.broadcast(&state_message(&leg, leg_index, t));
        if last_beat.elapsed() >= HEARTBEAT {
            clients.broadcast(&Outbound::Heartbeat { t });
            last_beat = Instant::now();
        }

        if leg.done() {
            let pose = leg.states()[ext];
            leg_index += 1;
            log::info!("leg {} finished at t = {t:.1}", leg_index - 1);
            if opts.max_legs.is_some_and(|m| leg_index >= m) {
                break;
            }
            let mut spawned = spawn_leg(&scenario.joust, leg_index);
            spawned[ext].start = pose;
            leg = Leg::from_spawn(scenario, leg_index, spawned);
        }

        next += period;
        let now = Instant::now();
        if next > now {
            thread::sleep(next - now);
        } else {
            next = now;
        }
    }
    Ok(())
}
