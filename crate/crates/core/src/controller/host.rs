//! Runs candidate controllers, either in-process or as a child process
//! speaking the line protocol, and classifies how they fail.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::scenario::ScenarioSpec;
use crate::sim::{run_simulation, ControlAction, SimError, SimTrace};

use super::program::parse_program;
use super::protocol::{ChildMessage, ErrorKind, HostMessage};
use super::reference::ReferenceController;
use super::{Controller, ControllerFault, ExecutabilityStatus, InitInfo, Observation};

pub const HANDSHAKE_TIMEOUT: f64 = 5.0;
pub const TICK_TIMEOUT: f64 = 1.0;
const STDERR_LIMIT: usize = 64 * 1024;
const EXIT_GRACE: Duration = Duration::from_millis(500);

fn default_handshake() -> f64 {
    HANDSHAKE_TIMEOUT
}

fn default_tick() -> f64 {
    TICK_TIMEOUT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessConfig {
    /// Program and leading arguments; the source path is appended.
    pub command: Vec<String>,
    #[serde(default)]
    pub source_suffix: String,
    #[serde(default = "default_handshake")]
    pub handshake_timeout: f64,
    #[serde(default = "default_tick")]
    pub tick_timeout: f64,
}

/// Where candidate code runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuntimeConfig {
    /// Interprets the controller language in-process.
    #[default]
    Builtin,
    Process(ProcessConfig),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpawnError {
    #[error("no code")]
    NoCode,
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("runtime error during start-up: {0}")]
    Runtime(String),
    #[error("handshake timed out")]
    Timeout,
    #[error("could not start controller: {0}")]
    Io(String),
}

impl SpawnError {
    pub fn status(&self, tc_id: &str) -> ExecutabilityStatus {
        match self {
            SpawnError::NoCode => ExecutabilityStatus::NoCode,
            SpawnError::Syntax(message) => ExecutabilityStatus::SyntaxError { message: message.clone() },
            SpawnError::Runtime(message) | SpawnError::Io(message) => {
                ExecutabilityStatus::RuntimeFailure { tc_id: tc_id.to_string(), tick: 0, message: message.clone() }
            }
            SpawnError::Timeout => ExecutabilityStatus::Timeout { tc_id: tc_id.to_string(), tick: None },
        }
    }
}

/// Status of a simulation that stopped on a controller fault.
pub fn fault_status(error: &SimError) -> ExecutabilityStatus {
    match error {
        SimError::Controller { scenario_id, tick, fault: ControllerFault::Timeout } => {
            ExecutabilityStatus::Timeout { tc_id: scenario_id.clone(), tick: Some(*tick) }
        }
        SimError::Controller { scenario_id, tick, fault } => {
            ExecutabilityStatus::RuntimeFailure { tc_id: scenario_id.clone(), tick: *tick, message: fault.to_string() }
        }
        SimError::InvalidTimestep(_) => {
            ExecutabilityStatus::RuntimeFailure { tc_id: String::new(), tick: 0, message: error.to_string() }
        }
    }
}

/// A live controller for one scenario run.
pub enum ControllerHandle {
    Builtin(ReferenceController),
    Process(ChildController),
}

impl<T: Scalar> Controller<T> for ControllerHandle {
    fn act(&mut self, tick: usize, obs: &Observation<T>) -> Result<ControlAction<T>, ControllerFault> {
        match self {
            ControllerHandle::Builtin(inner) => inner.act(tick, obs),
            ControllerHandle::Process(inner) => {
                let action = inner.tick(tick, obs.cast())?;
                Ok(ControlAction { accel: T::of(action.accel), lane_change: action.lane_change })
            }
        }
    }

    fn finish(&mut self) {
        if let ControllerHandle::Process(inner) = self {
            inner.end();
        }
    }
}

pub fn spawn(code: &str, runtime: &RuntimeConfig, init: &InitInfo) -> Result<ControllerHandle, SpawnError> {
    if code.trim().is_empty() {
        return Err(SpawnError::NoCode);
    }
    match runtime {
        RuntimeConfig::Builtin => {
            let program = parse_program(code).map_err(|e| SpawnError::Syntax(e.to_string()))?;
            Ok(ControllerHandle::Builtin(ReferenceController::new(program, init.clone())))
        }
        RuntimeConfig::Process(config) => ChildController::start(code, config, init).map(ControllerHandle::Process),
    }
}

/// Runs one scenario with a freshly spawned controller.
pub fn execute_case<T: Scalar>(
    code: &str,
    runtime: &RuntimeConfig,
    spec: &ScenarioSpec<T>,
    dt: T,
) -> (ExecutabilityStatus, Option<SimTrace<T>>) {
    let mut handle = match spawn(code, runtime, &InitInfo::from_spec(spec, dt)) {
        Ok(handle) => handle,
        Err(err) => return (err.status(&spec.id), None),
    };
    match run_simulation(spec, &mut handle, dt) {
        Ok(trace) => (ExecutabilityStatus::Executable, Some(trace)),
        Err(err) => (fault_status(&err), None),
    }
}

static SOURCE_COUNTER: AtomicUsize = AtomicUsize::new(0);

/// A controller child process. Killed and reaped on drop.
pub struct ChildController {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
    stderr: Arc<Mutex<String>>,
    stderr_reader: Option<thread::JoinHandle<()>>,
    tick_timeout: Duration,
    source_path: PathBuf,
}

impl ChildController {
    pub fn start(code: &str, config: &ProcessConfig, init: &InitInfo) -> Result<Self, SpawnError> {
        let (program, args) = config.command.split_first().ok_or_else(|| SpawnError::Io("empty command".into()))?;
        let source_path = std::env::temp_dir().join(format!(
            "drivegen-{}-{}{}",
            std::process::id(),
            SOURCE_COUNTER.fetch_add(1, Ordering::Relaxed),
            config.source_suffix
        ));
        std::fs::write(&source_path, code).map_err(|e| SpawnError::Io(e.to_string()))?;
        let spawned = Command::new(program)
            .args(args)
            .arg(&source_path)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn();
        let mut child = match spawned {
            Ok(child) => child,
            Err(e) => {
                let _ = std::fs::remove_file(&source_path);
                return Err(SpawnError::Io(format!("{program}: {e}")));
            }
        };
        log::debug!("spawned controller pid {} for {}", child.id(), init.scenario_id);

        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let mut pipe = child.stderr.take().expect("stderr is piped");
        let sink = Arc::clone(&stderr);
        let stderr_reader = thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut text = sink.lock().expect("stderr lock");
                if text.len() < STDERR_LIMIT {
                    text.push_str(&String::from_utf8_lossy(&buf[..n]));
                }
            }
        });

        let stdin = child.stdin.take();
        let mut controller = ChildController {
            child,
            stdin,
            lines,
            stderr,
            stderr_reader: Some(stderr_reader),
            tick_timeout: Duration::from_secs_f64(config.tick_timeout),
            source_path,
        };
        controller.handshake(init, Duration::from_secs_f64(config.handshake_timeout))?;
        Ok(controller)
    }

    pub fn pid(&self) -> u32 {
        self.child.id()
    }

    fn send(&mut self, message: &HostMessage) -> std::io::Result<()> {
        let stdin = self.stdin.as_mut().ok_or_else(|| std::io::Error::other("stdin closed"))?;
        stdin.write_all(message.to_line().as_bytes())?;
        stdin.flush()
    }

    /// Next non-blank line from the child.
    fn receive(&self, timeout: Duration) -> Result<String, RecvTimeoutError> {
        loop {
            let line = self.lines.recv_timeout(timeout)?;
            if !line.trim().is_empty() {
                return Ok(line);
            }
        }
    }

    /// Diagnostic text after the child has gone away.
    fn exit_diagnostic(&mut self) -> String {
        let status = self.child.wait().ok();
        if let Some(reader) = self.stderr_reader.take() {
            let _ = reader.join();
        }
        let stderr = self.stderr.lock().expect("stderr lock").trim().to_string();
        let status = status.map_or_else(|| "unknown status".to_string(), |s| s.to_string());
        if stderr.is_empty() {
            format!("controller process exited ({status})")
        } else {
            format!("controller process exited ({status}): {stderr}")
        }
    }

    fn handshake(&mut self, init: &InitInfo, timeout: Duration) -> Result<(), SpawnError> {
        if self.send(&HostMessage::from(init)).is_err() {
            return Err(SpawnError::Syntax(self.exit_diagnostic()));
        }
        match self.receive(timeout) {
            Ok(line) => match serde_json::from_str::<ChildMessage>(&line) {
                Ok(ChildMessage::Ready) => Ok(()),
                Ok(ChildMessage::Error { kind: ErrorKind::Syntax, message, .. }) => Err(SpawnError::Syntax(message)),
                Ok(ChildMessage::Error { kind: ErrorKind::Runtime, message, .. }) => Err(SpawnError::Runtime(message)),
                Ok(other) => Err(SpawnError::Runtime(format!("expected ready, got {other:?}"))),
                Err(e) => Err(SpawnError::Runtime(format!("malformed handshake reply `{line}`: {e}"))),
            },
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                Err(SpawnError::Timeout)
            }
            // the child died before signalling readiness, typically a compile error
            Err(RecvTimeoutError::Disconnected) => Err(SpawnError::Syntax(self.exit_diagnostic())),
        }
    }

    pub fn tick(&mut self, tick: usize, observation: Observation<f64>) -> Result<ControlAction<f64>, ControllerFault> {
        if self.send(&HostMessage::Observe { tick, observation }).is_err() {
            return Err(ControllerFault::Runtime(self.exit_diagnostic()));
        }
        match self.receive(self.tick_timeout) {
            Ok(line) => match serde_json::from_str::<ChildMessage>(&line) {
                Ok(ChildMessage::Act { accel, lane_change }) => Ok(ControlAction { accel, lane_change }),
                Ok(ChildMessage::Error { message, .. }) => Err(ControllerFault::Runtime(message)),
                Ok(other) => Err(ControllerFault::Malformed(format!("expected act, got {other:?}"))),
                Err(e) => Err(ControllerFault::Malformed(format!("`{line}`: {e}"))),
            },
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                Err(ControllerFault::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => Err(ControllerFault::Runtime(self.exit_diagnostic())),
        }
    }

    /// Sends `end` and gives the child a moment to exit on its own.
    pub fn end(&mut self) {
        let _ = self.send(&HostMessage::End);
        self.stdin = None;
        let deadline = std::time::Instant::now() + EXIT_GRACE;
        while std::time::Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        self.kill();
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    pub fn stderr(&self) -> String {
        self.stderr.lock().expect("stderr lock").clone()
    }
}

impl Drop for ChildController {
    fn drop(&mut self) {
        self.stdin = None;
        if !matches!(self.child.try_wait(), Ok(Some(_))) {
            self.kill();
        }
        let _ = std::fs::remove_file(&self.source_path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::reference::{EAGER, GOLD_CAEM};
    use crate::scenario::build_test_case;

    fn init() -> InitInfo {
        InitInfo::from_spec(&build_test_case::<f64>("TC1").unwrap(), 0.05)
    }

    #[test]
    fn empty_source_is_no_code() {
        assert!(matches!(spawn("  \n", &RuntimeConfig::Builtin, &init()), Err(SpawnError::NoCode)));
        assert_eq!(SpawnError::NoCode.status("TC1"), ExecutabilityStatus::NoCode);
    }

    #[test]
    fn builtin_syntax_error() {
        let err = spawn("def broken(:", &RuntimeConfig::Builtin, &init()).err().unwrap();
        assert!(matches!(err.status("TC1"), ExecutabilityStatus::SyntaxError { .. }));
    }

    #[test]
    fn execute_case_runs_builtin_controllers() {
        let spec = build_test_case::<f64>("TC6").unwrap();
        let (status, trace) = execute_case(GOLD_CAEM, &RuntimeConfig::Builtin, &spec, 0.05);
        assert!(status.is_executable());
        assert_eq!(trace.unwrap().frames.len(), 401);
        let (status, _) = execute_case("controller = noop\nfault = empty_road", &RuntimeConfig::Builtin, &spec, 0.05);
        assert_eq!(
            status,
            ExecutabilityStatus::RuntimeFailure {
                tc_id: "TC6".into(),
                tick: 0,
                message: "IndexError: list index out of range (no agents observed)".into()
            }
        );
        assert!(execute_case(EAGER, &RuntimeConfig::Builtin, &spec, 0.05).0.is_executable());
    }

    #[test]
    fn runtime_config_json() {
        let json = r#"{"kind":"process","command":["python3","shim.py"]}"#;
        let config: RuntimeConfig = serde_json::from_str(json).unwrap();
        assert_eq!(
            config,
            RuntimeConfig::Process(ProcessConfig {
                command: vec!["python3".into(), "shim.py".into()],
                source_suffix: String::new(),
                handshake_timeout: 5.0,
                tick_timeout: 1.0,
            })
        );
        assert_eq!(serde_json::from_str::<RuntimeConfig>(r#"{"kind":"builtin"}"#).unwrap(), RuntimeConfig::Builtin);
    }
}
