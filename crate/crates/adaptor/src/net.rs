//! Socket layer of the adaptor. Objects never touch sockets directly; they
//! go through a [`NetworkBackend`], which is what lets the harness interpose
//! a simulated network.

use std::collections::HashMap;
use std::io;
use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpStream, UdpSocket};
use std::sync::{Arc, Mutex, Weak};
use std::time::Duration;

use thiserror::Error;

/// Receives datagrams arriving on bound ports.
pub trait DatagramSink: Send + Sync {
    fn on_datagram(&self, local_port: u16, from: SocketAddr, data: &[u8]);
}

#[derive(Debug, Error)]
pub enum BindError {
    #[error("port {0} is in use")]
    InUse(u16),
    #[error("bind failed: {0}")]
    Io(#[from] io::Error),
}

/// An outbound TCP connection.
pub trait TcpConnection: Send {
    fn send(&mut self, data: &[u8]) -> io::Result<()>;
    fn local_addr(&self) -> io::Result<SocketAddr>;
}

impl TcpConnection for TcpStream {
    fn send(&mut self, data: &[u8]) -> io::Result<()> {
        io::Write::write_all(self, data)
    }

    fn local_addr(&self) -> io::Result<SocketAddr> {
        TcpStream::local_addr(self)
    }
}

/// Contract: implementations must never call back into the attached sink
/// from inside `bind_udp`, `send_udp` or `close_udp`.
pub trait NetworkBackend: Send + Sync {
    fn attach(&self, sink: Weak<dyn DatagramSink>);
    /// Binds `port`, or any free port above 1024 when `port` is 0.
    fn bind_udp(&self, port: u16) -> Result<u16, BindError>;
    fn close_udp(&self, port: u16);
    fn send_udp(&self, local_port: u16, to: SocketAddr, data: &[u8]) -> io::Result<()>;
    /// Address advertised in host candidates.
    fn host_address(&self) -> IpAddr;
    /// Reflector used to learn server-reflexive addresses, if any.
    fn reflector(&self) -> Option<SocketAddr> {
        None
    }
    /// Queries the reflector from `local_port`. Returns the mapped address.
    fn reflexive_address(&self, _local_port: u16) -> Option<SocketAddr> {
        None
    }
    fn connect_tcp(&self, _to: SocketAddr) -> io::Result<Box<dyn TcpConnection>> {
        Err(io::Error::new(io::ErrorKind::Unsupported, "tcp is not available on this network"))
    }
}

struct BoundSocket {
    socket: Arc<UdpSocket>,
    task: tokio::task::JoinHandle<()>,
}

/// Real UDP sockets. Sends go straight out on the std socket; each socket
/// gets a receive task on the given tokio runtime.
pub struct UdpBackend {
    bind_ip: IpAddr,
    advertised: IpAddr,
    runtime: tokio::runtime::Handle,
    sockets: Mutex<HashMap<u16, BoundSocket>>,
    /// Receive tasks aborted by `close_udp` that may still hold their fd.
    closing: Mutex<HashMap<u16, tokio::task::JoinHandle<()>>>,
    sink: Arc<Mutex<Option<Weak<dyn DatagramSink>>>>,
}

impl UdpBackend {
    /// Binds on `bind_ip` and advertises `advertised` in candidates.
    pub fn new(bind_ip: IpAddr, advertised: IpAddr, runtime: tokio::runtime::Handle) -> Self {
        Self {
            bind_ip,
            advertised,
            runtime,
            sockets: Mutex::new(HashMap::new()),
            closing: Mutex::new(HashMap::new()),
            sink: Arc::new(Mutex::new(None)),
        }
    }

    /// Loopback-only backend for local testing.
    pub fn loopback(runtime: tokio::runtime::Handle) -> Self {
        let lo = IpAddr::V4(Ipv4Addr::LOCALHOST);
        Self::new(lo, lo, runtime)
    }
}

impl NetworkBackend for UdpBackend {
    fn attach(&self, sink: Weak<dyn DatagramSink>) {
        *self.sink.lock().unwrap() = Some(sink);
    }

    fn bind_udp(&self, port: u16) -> Result<u16, BindError> {
        let draining = self.closing.lock().unwrap().remove(&port);
        if let Some(task) = draining {
            let deadline = std::time::Instant::now() + Duration::from_millis(200);
            while !task.is_finished() && std::time::Instant::now() < deadline {
                std::thread::sleep(Duration::from_millis(1));
            }
        }
        let socket = match UdpSocket::bind(SocketAddr::new(self.bind_ip, port)) {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::AddrInUse => return Err(BindError::InUse(port)),
            Err(e) => return Err(e.into()),
        };
        let actual = socket.local_addr()?.port();
        if actual <= 1024 {
            return Err(BindError::Io(io::Error::other("kernel assigned a privileged port")));
        }
        socket.set_nonblocking(true)?;
        let socket = Arc::new(socket);
        let recv_socket = socket.try_clone()?;
        let sink = self.sink.clone();
        let task = self.runtime.spawn(async move {
            let Ok(sock) = tokio::net::UdpSocket::from_std(recv_socket) else {
                return;
            };
            let mut buf = vec![0u8; 65_536];
            loop {
                let Ok((n, from)) = sock.recv_from(&mut buf).await else {
                    continue;
                };
                let target = sink.lock().unwrap().as_ref().and_then(Weak::upgrade);
                let Some(sink) = target else {
                    return;
                };
                sink.on_datagram(actual, from, &buf[..n]);
            }
        });
        self.sockets.lock().unwrap().insert(actual, BoundSocket { socket, task });
        Ok(actual)
    }

    fn close_udp(&self, port: u16) {
        if let Some(bound) = self.sockets.lock().unwrap().remove(&port) {
            bound.task.abort();
            let mut closing = self.closing.lock().unwrap();
            closing.retain(|_, t| !t.is_finished());
            closing.insert(port, bound.task);
        }
    }

    fn send_udp(&self, local_port: u16, to: SocketAddr, data: &[u8]) -> io::Result<()> {
        let socket = self
            .sockets
            .lock()
            .unwrap()
            .get(&local_port)
            .map(|b| b.socket.clone())
            .ok_or_else(|| io::Error::new(io::ErrorKind::NotConnected, "port not bound"))?;
        match socket.send_to(data, to) {
            Ok(_) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => Ok(()),
            Err(e) => Err(e),
        }
    }

    fn host_address(&self) -> IpAddr {
        self.advertised
    }

    fn connect_tcp(&self, to: SocketAddr) -> io::Result<Box<dyn TcpConnection>> {
        let stream = TcpStream::connect_timeout(&to, Duration::from_secs(5))?;
        Ok(Box::new(stream))
    }
}

impl Drop for UdpBackend {
    fn drop(&mut self) {
        for (_, bound) in self.sockets.lock().unwrap().drain() {
            bound.task.abort();
        }
    }
}
