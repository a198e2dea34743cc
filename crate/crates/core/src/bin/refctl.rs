//! Child-process runtime for the controller language: `refctl <source_path>`.
//!
//! Speaks the host line protocol on stdin/stdout and honours `#!` directives,
//! which exist to exercise the host's fault handling.

use std::io::{BufRead, Write};
use std::time::Duration;

use drivegen::controller::program::Directive;
use drivegen::controller::protocol::{ChildMessage, ErrorKind, HostMessage};
use drivegen::controller::{parse_program, Controller, InitInfo, ReferenceController};

fn reply(out: &mut impl Write, message: ChildMessage) {
    // the host going away is the only way this fails, and then there is nothing left to do
    if out.write_all(message.to_line().as_bytes()).and_then(|_| out.flush()).is_err() {
        std::process::exit(0);
    }
}

fn hang() -> ! {
    loop {
        std::thread::sleep(Duration::from_secs(3600));
    }
}

fn main() {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: refctl <source_path>");
        std::process::exit(2);
    };
    let source = match std::fs::read_to_string(&path) {
        Ok(source) => source,
        Err(e) => {
            eprintln!("refctl: cannot read {path}: {e}");
            std::process::exit(2);
        }
    };
    let program = parse_program(&source);
    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    let mut controller: Option<ReferenceController> = None;

    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let message: HostMessage = match serde_json::from_str(&line) {
            Ok(message) => message,
            Err(e) => {
                reply(
                    &mut out,
                    ChildMessage::Error { kind: ErrorKind::Runtime, tick: None, message: format!("bad message: {e}") },
                );
                continue;
            }
        };
        match message {
            HostMessage::Init { .. } => {
                let program = match &program {
                    Ok(program) => program.clone(),
                    Err(e) => {
                        reply(
                            &mut out,
                            ChildMessage::Error { kind: ErrorKind::Syntax, tick: None, message: e.to_string() },
                        );
                        std::process::exit(1);
                    }
                };
                if program.directives.contains(&Directive::HangOnInit) {
                    hang();
                }
                let init = InitInfo::from_message(&message).expect("message is init");
                controller = Some(ReferenceController::new(program, init));
                reply(&mut out, ChildMessage::Ready);
            }
            HostMessage::Observe { tick, observation } => {
                let Some(controller) = controller.as_mut() else {
                    reply(
                        &mut out,
                        ChildMessage::Error {
                            kind: ErrorKind::Runtime,
                            tick: Some(tick),
                            message: "observe before init".into(),
                        },
                    );
                    continue;
                };
                for directive in &controller.program().directives {
                    match *directive {
                        Directive::HangAtTick(n) if n == tick => hang(),
                        Directive::CrashAtTick(n) if n == tick => {
                            eprintln!("Traceback (most recent call last):\nZeroDivisionError: division by zero");
                            std::process::exit(1);
                        }
                        _ => {}
                    }
                }
                match Controller::<f64>::act(controller, tick, &observation) {
                    Ok(action) => {
                        reply(&mut out, ChildMessage::Act { accel: action.accel, lane_change: action.lane_change })
                    }
                    Err(fault) => reply(
                        &mut out,
                        ChildMessage::Error { kind: ErrorKind::Runtime, tick: Some(tick), message: fault.to_string() },
                    ),
                }
            }
            HostMessage::End => break,
        }
    }
}
