use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use tokio::sync::{mpsc, Mutex as AsyncMutex};

/// A datagram socket carrying SIP.
#[async_trait]
pub trait SipSocket: Send + Sync {
    async fn send_to(&self, data: &[u8], to: SocketAddr) -> io::Result<()>;
    async fn recv_from(&self) -> io::Result<(Vec<u8>, SocketAddr)>;
    fn local_addr(&self) -> SocketAddr;
}

pub struct UdpSipSocket {
    socket: tokio::net::UdpSocket,
    local: SocketAddr,
}

impl UdpSipSocket {
    pub async fn bind(addr: SocketAddr) -> io::Result<Self> {
        let socket = tokio::net::UdpSocket::bind(addr).await?;
        let local = socket.local_addr()?;
        Ok(Self { socket, local })
    }
}

#[async_trait]
impl SipSocket for UdpSipSocket {
    async fn send_to(&self, data: &[u8], to: SocketAddr) -> io::Result<()> {
        self.socket.send_to(data, to).await.map(drop)
    }

    async fn recv_from(&self) -> io::Result<(Vec<u8>, SocketAddr)> {
        let mut buf = vec![0u8; 65_535];
        let (n, from) = self.socket.recv_from(&mut buf).await?;
        buf.truncate(n);
        Ok((buf, from))
    }

    fn local_addr(&self) -> SocketAddr {
        self.local
    }
}

type Datagram = (Vec<u8>, SocketAddr);

/// In-memory datagram network for tests. Datagrams to unbound addresses
/// are dropped.
#[derive(Clone, Default)]
pub struct MemSipNet {
    ports: Arc<Mutex<HashMap<SocketAddr, mpsc::UnboundedSender<Datagram>>>>,
}

impl MemSipNet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&self, addr: SocketAddr) -> MemSipSocket {
        let (tx, rx) = mpsc::unbounded_channel();
        self.ports.lock().unwrap().insert(addr, tx);
        MemSipSocket {
            net: self.clone(),
            local: addr,
            rx: AsyncMutex::new(rx),
        }
    }
}

pub struct MemSipSocket {
    net: MemSipNet,
    local: SocketAddr,
    rx: AsyncMutex<mpsc::UnboundedReceiver<Datagram>>,
}

#[async_trait]
impl SipSocket for MemSipSocket {
    async fn send_to(&self, data: &[u8], to: SocketAddr) -> io::Result<()> {
        if let Some(tx) = self.net.ports.lock().unwrap().get(&to) {
            let _ = tx.send((data.to_vec(), self.local));
        }
        Ok(())
    }

    async fn recv_from(&self) -> io::Result<Datagram> {
        self.rx
            .lock()
            .await
            .recv()
            .await
            .ok_or_else(|| io::Error::new(io::ErrorKind::BrokenPipe, "network closed"))
    }

    fn local_addr(&self) -> SocketAddr {
        self.local
    }
}

impl Drop for MemSipSocket {
    fn drop(&mut self) {
        self.net.ports.lock().unwrap().remove(&self.local);
    }
}
