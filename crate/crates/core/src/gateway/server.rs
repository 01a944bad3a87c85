//! Line-delimited JSON over TCP. One reader thread per connection, one
//! writer thread per connection, and a ticker that fires timers and routes
//! the resulting frames to the connection owning each session.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use super::{lock, Engine};
use crate::clock::Clock;
use crate::protocol::{decode_str, encode_line, Frame, Message};

type Routes = Arc<Mutex<BTreeMap<String, Sender<Frame>>>>;

pub struct Server {
    listener: TcpListener,
    engine: Arc<Engine>,
    clock: Arc<dyn Clock>,
    routes: Routes,
    tick: Duration,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, engine: Arc<Engine>, clock: Arc<dyn Clock>) -> io::Result<Server> {
        Ok(Server {
            listener: TcpListener::bind(addr)?,
            engine,
            clock,
            routes: Arc::new(Mutex::new(BTreeMap::new())),
            tick: Duration::from_millis(50),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until the listener fails.
    pub fn run(self) -> io::Result<()> {
        {
            let (engine, clock, routes, tick) =
                (self.engine.clone(), self.clock.clone(), self.routes.clone(), self.tick);
            thread::spawn(move || loop {
                thread::sleep(tick);
                for f in engine.tick(clock.now()) {
                    route(&routes, f);
                }
            });
        }
        for stream in self.listener.incoming() {
            let stream = stream?;
            let (engine, clock, routes) = (self.engine.clone(), self.clock.clone(), self.routes.clone());
            thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = connection(stream, engine, clock, routes) {
                    tracing::debug!(?peer, error = %e, "connection closed");
                }
            });
        }
        Ok(())
    }

    pub fn spawn(self) -> thread::JoinHandle<io::Result<()>> {
        thread::spawn(move || self.run())
    }
}

fn route(routes: &Routes, frame: Frame) {
    let tx = lock(routes).get(&frame.session).cloned();
    match tx {
        Some(tx) => {
            let _ = tx.send(frame);
        }
        None => tracing::debug!(session = %frame.session, "dropping frame for disconnected session"),
    }
}

fn connection(stream: TcpStream, engine: Arc<Engine>, clock: Arc<dyn Clock>, routes: Routes) -> io::Result<()> {
    let (tx, rx) = channel::<Frame>();
    let mut writer = stream.try_clone()?;
    let writer_thread = thread::spawn(move || {
        for f in rx {
            if writer.write_all(&encode_line(&f)).and_then(|_| writer.flush()).is_err() {
                break;
            }
        }
    });
    let mut owned: BTreeSet<String> = BTreeSet::new();
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let now = clock.now();
        let frame = match decode_str(&line) {
            Ok(f) => f,
            Err(e) => {
                let _ = tx.send(Frame::new("", now, Message::error(e.code(), e.to_string())));
                continue;
            }
        };
        let opening = matches!(frame.message, Message::Open { .. });
        if !opening && !owned.contains(&frame.session) {
            let _ = tx.send(Frame::new(
                frame.session.clone(),
                now,
                Message::error("not_owner", "session belongs to another connection"),
            ));
            continue;
        }
        let out = engine.handle(frame, now);
        if opening {
            if let Some(Frame { session, message: Message::Ack { .. }, .. }) = out.first() {
                owned.insert(session.clone());
                lock(&routes).insert(session.clone(), tx.clone());
            }
        }
        for f in out {
            let _ = tx.send(f);
        }
    }
    {
        let mut r = lock(&routes);
        for s in &owned {
            r.remove(s);
        }
    }
    drop(tx);
    let _ = writer_thread.join();
    Ok(())
}

/// Binds and serves forever.
pub fn serve(addr: impl ToSocketAddrs, engine: Arc<Engine>, clock: Arc<dyn Clock>) -> io::Result<()> {
    let server = Server::bind(addr, engine, clock)?;
    tracing::info!(addr = %server.local_addr()?, "listening");
    server.run()
}
