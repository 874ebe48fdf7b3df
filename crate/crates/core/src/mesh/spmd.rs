//! Single-threaded SPMD executor over a simulated message fabric.
//!
//! Each processor runs the same `async` program. The executor polls them in
//! rank order until all finish; a program only suspends while waiting for a
//! message, so a full round in which no message moves and no program finishes
//! is a deadlock.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;
use std::future::{poll_fn, Future};
use std::ops::Deref;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use crate::error::{Error, FaultKind, Result};
use crate::mesh::grid::{ProcCoord, ProcGrid};
use crate::mesh::ledger::{CommLedger, Phase};
use crate::mesh::payload::{PartShape, Payload, Shardable};
use crate::scalar::Scalar;

type ChannelKey = (usize, usize, String);

/// FIFO channel. Messages carry a sequence number from the sender and each
/// receive claims the next ticket, so matching is order-preserving even when
/// asynchronous receives are waited out of order.
struct Channel<T> {
    next_seq: u64,
    next_ticket: u64,
    pending: BTreeMap<u64, Payload<T>>,
}

impl<T> Default for Channel<T> {
    fn default() -> Self {
        Self {
            next_seq: 0,
            next_ticket: 0,
            pending: BTreeMap::new(),
        }
    }
}

enum TransferState<T> {
    InFlight,
    Arrived(Payload<T>),
}

struct Transfer<T> {
    owner: usize,
    channel: ChannelKey,
    ticket: u64,
    phase: Phase,
    op: String,
    peer_to: ProcCoord,
    peer_from: ProcCoord,
    sent_words: u64,
    sent_shape: Vec<PartShape>,
    state: TransferState<T>,
}

struct Fabric<T> {
    grid: ProcGrid,
    channels: BTreeMap<ChannelKey, Channel<T>>,
    transfers: BTreeMap<u64, Transfer<T>>,
    next_transfer: u64,
    ledger: CommLedger,
    events: u64,
    blocked: Vec<Option<String>>,
}

impl<T: Scalar> Fabric<T> {
    fn new(grid: ProcGrid) -> Self {
        Self {
            grid,
            channels: BTreeMap::new(),
            transfers: BTreeMap::new(),
            next_transfer: 0,
            ledger: CommLedger::new(grid),
            events: 0,
            blocked: vec![None; grid.p()],
        }
    }

    fn enqueue(&mut self, key: ChannelKey, payload: Payload<T>) {
        let ch = self.channels.entry(key).or_default();
        let seq = ch.next_seq;
        ch.next_seq += 1;
        ch.pending.insert(seq, payload);
        self.events += 1;
    }

    fn ticket(&mut self, key: ChannelKey) -> u64 {
        let ch = self.channels.entry(key).or_default();
        let t = ch.next_ticket;
        ch.next_ticket += 1;
        t
    }

    fn claim(&mut self, key: &ChannelKey, ticket: u64) -> Option<Payload<T>> {
        let p = self.channels.get_mut(key)?.pending.remove(&ticket)?;
        self.events += 1;
        Some(p)
    }
}

#[derive(Debug)]
struct StreamState {
    rank: usize,
    name: String,
    capacity: usize,
    live: usize,
    peak: usize,
}

#[derive(Debug, Default)]
struct StreamBook {
    streams: Vec<StreamState>,
}

/// A named buffer pool with a fixed number of live slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stream {
    id: usize,
}

/// Occupies one slot of a [`Stream`] until dropped.
#[derive(Debug)]
pub struct Lease {
    book: Rc<RefCell<StreamBook>>,
    id: usize,
}

impl Drop for Lease {
    fn drop(&mut self) {
        self.book.borrow_mut().streams[self.id].live -= 1;
    }
}

/// Data read out of a receive buffer, possibly occupying a stream slot.
#[derive(Debug)]
pub struct Slot<S> {
    value: S,
    lease: Option<Lease>,
}

impl<S> Slot<S> {
    pub fn into_inner(self) -> S {
        self.value
    }

    pub fn is_leased(&self) -> bool {
        self.lease.is_some()
    }

    /// Transforms the value while keeping its stream slot.
    pub fn try_map<U>(self, f: impl FnOnce(S) -> Result<U>) -> Result<Slot<U>> {
        Ok(Slot {
            value: f(self.value)?,
            lease: self.lease,
        })
    }
}

impl<S> Deref for Slot<S> {
    type Target = S;

    fn deref(&self) -> &S {
        &self.value
    }
}

/// Completion token for one asynchronous exchange. Consumed by
/// [`Comm::wait`], so it cannot be waited twice.
#[derive(Debug)]
#[must_use = "an exchange that is never waited is reported as a leaked handle"]
pub struct AsyncHandle {
    id: u64,
}

/// Where the incoming half of an asynchronous exchange lands.
#[derive(Debug)]
pub struct RecvBuffer {
    id: u64,
    lease: Option<Lease>,
}

/// A processor's view of the fabric.
pub struct Comm<T> {
    at: ProcCoord,
    rank: usize,
    grid: ProcGrid,
    fabric: Rc<RefCell<Fabric<T>>>,
    streams: Rc<RefCell<StreamBook>>,
    phase: Cell<Phase>,
}

impl<T: Scalar> Comm<T> {
    pub fn coord(&self) -> ProcCoord {
        self.at
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn grid(&self) -> ProcGrid {
        self.grid
    }

    pub fn phase(&self) -> Phase {
        self.phase.get()
    }

    /// Phase tag charged for subsequent transfers.
    pub fn set_phase(&self, phase: Phase) {
        self.phase.set(phase);
    }

    fn fault(&self, kind: FaultKind) -> Error {
        Error::Fault {
            r: self.at.r,
            c: self.at.c,
            kind,
        }
    }

    fn check_peer(&self, peer: ProcCoord) -> Result<usize> {
        if !self.grid.contains(peer) {
            return Err(Error::Config(format!(
                "{peer} is outside the {}x{} grid",
                self.grid.rows(),
                self.grid.cols()
            )));
        }
        Ok(self.grid.rank(peer))
    }

    /// Buffered send; never blocks. Sending to oneself moves no words.
    pub fn send(&self, payload: Payload<T>, to: ProcCoord, op: &str) -> Result<()> {
        let dst = self.check_peer(to)?;
        let words = payload.words() as u64;
        let mut f = self.fabric.borrow_mut();
        if dst != self.rank {
            f.ledger.charge_send(self.at, self.phase(), op, words);
        }
        f.enqueue((self.rank, dst, op.to_string()), payload);
        Ok(())
    }

    /// Blocks until the next message from `from` with label `op` arrives.
    pub async fn recv(&self, from: ProcCoord, op: &str) -> Result<Payload<T>> {
        let src = self.check_peer(from)?;
        let key = (src, self.rank, op.to_string());
        let ticket = self.fabric.borrow_mut().ticket(key.clone());
        let payload = self.arrival(&key, ticket, op, from).await;
        if src != self.rank {
            let words = payload.words() as u64;
            self.fabric
                .borrow_mut()
                .ledger
                .charge_recv(self.at, self.phase(), op, words);
        }
        Ok(payload)
    }

    async fn arrival(&self, key: &ChannelKey, ticket: u64, op: &str, from: ProcCoord) -> Payload<T> {
        poll_fn(|_| {
            let mut f = self.fabric.borrow_mut();
            match f.claim(key, ticket) {
                Some(p) => {
                    f.blocked[self.rank] = None;
                    Poll::Ready(p)
                }
                None => {
                    f.blocked[self.rank] =
                        Some(format!("{} blocked receiving '{op}' from {from}", self.at));
                    Poll::Pending
                }
            }
        })
        .await
    }

    fn check_pairing(&self, to: ProcCoord, from: ProcCoord) -> Result<()> {
        if (to == self.at) != (from == self.at) {
            return Err(self.fault(FaultKind::AsymmetricSelfExchange));
        }
        Ok(())
    }

    /// Blocking exchange: sends `data` to `to` and returns what `from` sent.
    /// Both directions must carry identically shaped data.
    pub async fn send_recv<S: Shardable<T>>(
        &self,
        data: S,
        to: ProcCoord,
        from: ProcCoord,
        op: &str,
    ) -> Result<S> {
        self.check_pairing(to, from)?;
        let outgoing = data.into_payload();
        let shape = outgoing.shape();
        self.send(outgoing, to, op)?;
        let incoming = self.recv(from, op).await?;
        if incoming.shape() != shape {
            return Err(Error::shape(
                "send_recv",
                format!("sent {shape:?} but received {:?} on '{op}'", incoming.shape()),
            ));
        }
        S::from_payload(incoming)
    }

    /// Starts an exchange and returns immediately. The ledger is charged for
    /// both directions when the handle is waited.
    pub fn async_send_recv<S: Shardable<T>>(
        &self,
        data: S,
        to: ProcCoord,
        from: ProcCoord,
        op: &str,
    ) -> Result<(RecvBuffer, AsyncHandle)> {
        self.post(data, to, from, op, None)
    }

    /// As [`Comm::async_send_recv`], with the incoming buffer occupying a
    /// slot of `stream` from now until the value read from it is dropped.
    pub fn async_send_recv_in<S: Shardable<T>>(
        &self,
        stream: Stream,
        data: S,
        to: ProcCoord,
        from: ProcCoord,
        op: &str,
    ) -> Result<(RecvBuffer, AsyncHandle)> {
        let lease = self.lease(stream)?;
        self.post(data, to, from, op, Some(lease))
    }

    fn post<S: Shardable<T>>(
        &self,
        data: S,
        to: ProcCoord,
        from: ProcCoord,
        op: &str,
        lease: Option<Lease>,
    ) -> Result<(RecvBuffer, AsyncHandle)> {
        self.check_pairing(to, from)?;
        let dst = self.check_peer(to)?;
        let src = self.check_peer(from)?;
        let outgoing = data.into_payload();
        let sent_words = outgoing.words() as u64;
        let sent_shape = outgoing.shape();
        let mut f = self.fabric.borrow_mut();
        f.enqueue((self.rank, dst, op.to_string()), outgoing);
        let channel = (src, self.rank, op.to_string());
        let ticket = f.ticket(channel.clone());
        let id = f.next_transfer;
        f.next_transfer += 1;
        f.transfers.insert(
            id,
            Transfer {
                owner: self.rank,
                channel,
                ticket,
                phase: self.phase(),
                op: op.to_string(),
                peer_to: to,
                peer_from: from,
                sent_words,
                sent_shape,
                state: TransferState::InFlight,
            },
        );
        Ok((RecvBuffer { id, lease }, AsyncHandle { id }))
    }

    /// Completes an asynchronous exchange.
    pub async fn wait(&self, handle: AsyncHandle) -> Result<()> {
        let (key, ticket, op, from) = {
            let f = self.fabric.borrow();
            match f.transfers.get(&handle.id) {
                Some(t) if t.owner == self.rank => {
                    (t.channel.clone(), t.ticket, t.op.clone(), t.peer_from)
                }
                _ => return Err(self.fault(FaultKind::UnknownTransfer { transfer: handle.id })),
            }
        };
        let payload = self.arrival(&key, ticket, &op, from).await;
        let mut f = self.fabric.borrow_mut();
        let t = f.transfers.get(&handle.id).expect("transfer registered");
        if payload.shape() != t.sent_shape {
            return Err(Error::shape(
                "async_send_recv",
                format!("sent {:?} but received {:?} on '{op}'", t.sent_shape, payload.shape()),
            ));
        }
        let (phase, sent, to) = (t.phase, t.sent_words, t.peer_to);
        if to != self.at {
            f.ledger.charge_send(self.at, phase, &op, sent);
            f.ledger
                .charge_recv(self.at, phase, &op, payload.words() as u64);
        }
        f.transfers.get_mut(&handle.id).expect("transfer registered").state =
            TransferState::Arrived(payload);
        Ok(())
    }

    /// Takes the data out of a receive buffer whose handle has been waited.
    pub fn read<S: Shardable<T>>(&self, buffer: RecvBuffer) -> Result<Slot<S>> {
        let RecvBuffer { id, lease } = buffer;
        let mut f = self.fabric.borrow_mut();
        match f.transfers.get(&id) {
            Some(t) if t.owner == self.rank => {
                if matches!(t.state, TransferState::InFlight) {
                    return Err(self.fault(FaultKind::UnwaitedRead { transfer: id }));
                }
            }
            _ => return Err(self.fault(FaultKind::UnknownTransfer { transfer: id })),
        }
        let t = f.transfers.remove(&id).expect("checked above");
        let TransferState::Arrived(payload) = t.state else {
            unreachable!("state checked above")
        };
        Ok(Slot {
            value: S::from_payload(payload)?,
            lease,
        })
    }

    /// Registers a buffer pool for this processor.
    pub fn open_stream(&self, name: &str, capacity: usize) -> Stream {
        let mut book = self.streams.borrow_mut();
        book.streams.push(StreamState {
            rank: self.rank,
            name: name.to_string(),
            capacity,
            live: 0,
            peak: 0,
        });
        Stream {
            id: book.streams.len() - 1,
        }
    }

    fn lease(&self, stream: Stream) -> Result<Lease> {
        let mut book = self.streams.borrow_mut();
        let s = &mut book.streams[stream.id];
        if s.rank != self.rank {
            return Err(Error::Config(format!("stream '{}' belongs to another processor", s.name)));
        }
        if s.live == s.capacity {
            return Err(self.fault(FaultKind::BufferOverflow {
                stream: s.name.clone(),
                capacity: s.capacity,
            }));
        }
        s.live += 1;
        s.peak = s.peak.max(s.live);
        Ok(Lease {
            book: Rc::clone(&self.streams),
            id: stream.id,
        })
    }

    /// Places locally owned data in a slot of `stream`.
    pub fn hold<S>(&self, stream: Stream, value: S) -> Result<Slot<S>> {
        let lease = self.lease(stream)?;
        Ok(Slot {
            value,
            lease: Some(lease),
        })
    }

    /// Live slots currently used in `stream`.
    pub fn stream_live(&self, stream: Stream) -> usize {
        self.streams.borrow().streams[stream.id].live
    }
}

/// Outcome of a completed SPMD run.
#[derive(Debug)]
pub struct SpmdRun<R> {
    /// One result per processor, in rank order.
    pub results: Vec<R>,
    pub ledger: CommLedger,
    /// Highest number of simultaneously live slots per processor and stream.
    pub stream_peaks: BTreeMap<(ProcCoord, String), usize>,
}

type Task<'a, R> = Pin<Box<dyn Future<Output = Result<R>> + 'a>>;

/// Runs `program` on every processor of `grid`.
pub fn run_spmd<'a, T, R, F, Fut>(grid: ProcGrid, mut program: F) -> Result<SpmdRun<R>>
where
    T: Scalar,
    F: FnMut(Comm<T>) -> Fut,
    Fut: Future<Output = Result<R>> + 'a,
{
    run_spmd_with(grid, vec![(); grid.p()], |comm, ()| program(comm))
}

/// Runs `program` on every processor, handing processor `k` the input
/// `inputs[k]`.
pub fn run_spmd_with<'a, T, I, R, F, Fut>(
    grid: ProcGrid,
    inputs: Vec<I>,
    mut program: F,
) -> Result<SpmdRun<R>>
where
    T: Scalar,
    F: FnMut(Comm<T>, I) -> Fut,
    Fut: Future<Output = Result<R>> + 'a,
{
    let p = grid.p();
    if inputs.len() != p {
        return Err(Error::Config(format!(
            "{} inputs for {p} processors",
            inputs.len()
        )));
    }
    let fabric = Rc::new(RefCell::new(Fabric::<T>::new(grid)));
    let streams = Rc::new(RefCell::new(StreamBook::default()));

    let mut tasks: Vec<Option<Task<'a, R>>> = inputs
        .into_iter()
        .enumerate()
        .map(|(rank, input)| {
            let comm = Comm {
                at: grid.coord(rank),
                rank,
                grid,
                fabric: Rc::clone(&fabric),
                streams: Rc::clone(&streams),
                phase: Cell::new(Phase::AttentionFwd),
            };
            Some(Box::pin(program(comm, input)) as Task<'a, R>)
        })
        .collect();
    let mut results: Vec<Option<R>> = (0..p).map(|_| None).collect();
    let mut cx = Context::from_waker(Waker::noop());

    loop {
        let events_before = fabric.borrow().events;
        let mut finished = false;
        let mut live = 0;
        for rank in 0..p {
            let Some(task) = tasks[rank].as_mut() else {
                continue;
            };
            match task.as_mut().poll(&mut cx) {
                Poll::Ready(Ok(r)) => {
                    results[rank] = Some(r);
                    tasks[rank] = None;
                    fabric.borrow_mut().blocked[rank] = None;
                    finished = true;
                }
                Poll::Ready(Err(e)) => return Err(e),
                Poll::Pending => live += 1,
            }
        }
        if live == 0 {
            break;
        }
        if !finished && fabric.borrow().events == events_before {
            let f = fabric.borrow();
            let lines: Vec<String> = (0..p)
                .filter(|&k| tasks[k].is_some())
                .map(|k| {
                    f.blocked[k]
                        .clone()
                        .unwrap_or_else(|| format!("{} suspended", grid.coord(k)))
                })
                .collect();
            return Err(Error::Deadlock(lines.join("; ")));
        }
    }
    drop(tasks);

    let fabric = Rc::try_unwrap(fabric)
        .ok()
        .expect("all processor handles dropped")
        .into_inner();
    check_clean(&fabric)?;

    let mut stream_peaks = BTreeMap::new();
    for s in &streams.borrow().streams {
        let e = stream_peaks
            .entry((grid.coord(s.rank), s.name.clone()))
            .or_insert(0);
        *e = (*e).max(s.peak);
    }

    Ok(SpmdRun {
        results: results.into_iter().map(|r| r.expect("finished")).collect(),
        ledger: fabric.ledger,
        stream_peaks,
    })
}

/// End-of-run hygiene: every exchange waited, every message received.
fn check_clean<T: Scalar>(f: &Fabric<T>) -> Result<()> {
    let p = f.grid.p();
    let mut leaked = vec![0usize; p];
    for t in f.transfers.values() {
        if matches!(t.state, TransferState::InFlight) {
            leaked[t.owner] += 1;
        }
    }
    if let Some(rank) = leaked.iter().position(|&n| n > 0) {
        let at = f.grid.coord(rank);
        return Err(Error::Fault {
            r: at.r,
            c: at.c,
            kind: FaultKind::LeakedHandles {
                count: leaked[rank],
            },
        });
    }
    let mut undelivered = vec![0usize; p];
    for ((_, dst, _), ch) in &f.channels {
        undelivered[*dst] += ch.pending.len();
    }
    if let Some(rank) = undelivered.iter().position(|&n| n > 0) {
        let at = f.grid.coord(rank);
        return Err(Error::Fault {
            r: at.r,
            c: at.c,
            kind: FaultKind::UndeliveredMessages {
                count: undelivered[rank],
            },
        });
    }
    Ok(())
}
