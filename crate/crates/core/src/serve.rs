//! Streaming scoring over a line protocol.
//!
//! The server sends `REV \t <corpus line>` for each revision, keeping at
//! most `window` revisions unanswered. The client answers each with
//! `SCORE \t rev_id \t score`, in any order. After the last answer the server
//! sends `END`; on a protocol violation it sends `ERROR \t <reason>` and
//! closes the session.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use crate::corpus::{parse_line, LabeledExample};
use crate::evaluation::{evaluate_scores, EvalReport, ScoredExample};
use crate::stacking::{StackError, StackedPipeline};
use crate::workflow::format_score;

pub const DEFAULT_WINDOW: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("timed out waiting for the peer")]
    Timeout,
    #[error("connection lost after {answered} answers")]
    ConnectionLost { answered: usize },
    #[error("malformed server line: {0:?}")]
    MalformedServerLine(String),
    #[error("server reported an error: {0}")]
    ServerError(String),
    #[error("window must be at least 1")]
    InvalidWindow,
    #[error(transparent)]
    Stack(#[from] StackError),
    #[error(transparent)]
    Eval(#[from] crate::evaluation::EvalError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SessionState {
    pub in_flight: usize,
    pub window: usize,
    pub sent: usize,
    pub answered: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    Sent(u64),
    Answered(u64),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub window: usize,
    /// Per-read timeout; `None` waits forever.
    pub timeout: Option<Duration>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            timeout: Some(Duration::from_secs(60)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServerOutcome {
    pub report: EvalReport,
    /// `(rev_id, score text as received)`, in corpus order.
    pub scores: Vec<(u64, String)>,
    pub trace: Vec<TraceEvent>,
    pub max_in_flight: usize,
}

impl ServerOutcome {
    /// The scores as a `rev_id \t score` file.
    pub fn scores_text(&self) -> String {
        self.scores.iter().map(|(id, s)| format!("{id}\t{s}\n")).collect()
    }
}

fn io_error(e: io::Error) -> ServeError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => ServeError::Timeout,
        _ => ServeError::Io(e),
    }
}

fn lost(e: io::Error, answered: usize) -> ServeError {
    match e.kind() {
        io::ErrorKind::ConnectionReset | io::ErrorKind::ConnectionAborted | io::ErrorKind::BrokenPipe | io::ErrorKind::UnexpectedEof => {
            ServeError::ConnectionLost { answered }
        }
        _ => ServeError::Io(e),
    }
}

/// Largest number of unanswered revisions at any point of a trace.
pub fn max_in_flight(trace: &[TraceEvent]) -> usize {
    let mut current = 0usize;
    let mut max = 0;
    for e in trace {
        match e {
            TraceEvent::Sent(_) => current += 1,
            TraceEvent::Answered(_) => current = current.saturating_sub(1),
        }
        max = max.max(current);
    }
    max
}

struct Session<'a> {
    examples: &'a [LabeledExample],
    position: HashMap<u64, usize>,
    answers: Vec<Option<String>>,
    outstanding: HashMap<u64, ()>,
    state: SessionState,
    trace: Vec<TraceEvent>,
    max_in_flight: usize,
}

impl Session<'_> {
    fn accept(&mut self, line: &str) -> Result<(), String> {
        let mut parts = line.split('\t');
        if parts.next() != Some("SCORE") {
            return Err(format!("expected SCORE line, got {line:?}"));
        }
        let (Some(id_raw), Some(score_raw), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("expected `SCORE\\trev_id\\tscore`, got {line:?}"));
        };
        let id: u64 = id_raw.parse().map_err(|_| format!("bad rev_id {id_raw:?}"))?;
        let score: f64 = score_raw.parse().map_err(|_| format!("bad score {score_raw:?}"))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(format!("score {score_raw} outside [0, 1]"));
        }
        let &pos = self.position.get(&id).ok_or_else(|| format!("unknown rev_id {id}"))?;
        if self.answers[pos].is_some() {
            return Err(format!("duplicate answer for rev_id {id}"));
        }
        if self.outstanding.remove(&id).is_none() {
            return Err(format!("rev_id {id} has not been sent"));
        }
        self.answers[pos] = Some(score_raw.to_string());
        self.state.in_flight -= 1;
        self.state.answered += 1;
        self.trace.push(TraceEvent::Answered(id));
        Ok(())
    }
}

/// Serve one session on the first connection accepted from `listener`.
pub fn run_server(examples: &[LabeledExample], listener: &TcpListener, cfg: &ServerConfig) -> Result<ServerOutcome, ServeError> {
    if cfg.window == 0 {
        return Err(ServeError::InvalidWindow);
    }
    let (stream, _) = listener.accept()?;
    serve_stream(examples, stream, cfg)
}

/// Run the server side of the protocol on an established connection.
pub fn serve_stream(examples: &[LabeledExample], stream: TcpStream, cfg: &ServerConfig) -> Result<ServerOutcome, ServeError> {
    if cfg.window == 0 {
        return Err(ServeError::InvalidWindow);
    }
    stream.set_read_timeout(cfg.timeout)?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);

    let mut session = Session {
        examples,
        position: examples.iter().enumerate().map(|(i, e)| (e.revision.rev_id, i)).collect(),
        answers: vec![None; examples.len()],
        outstanding: HashMap::new(),
        state: SessionState {
            window: cfg.window,
            ..SessionState::default()
        },
        trace: Vec::with_capacity(2 * examples.len()),
        max_in_flight: 0,
    };
    let mut line = String::new();
    while session.state.answered < examples.len() {
        if session.state.sent < examples.len() && session.state.in_flight < session.state.window {
            let rev = &session.examples[session.state.sent].revision;
            writeln!(writer, "REV\t{}", rev.to_line())?;
            session.outstanding.insert(rev.rev_id, ());
            session.state.sent += 1;
            session.state.in_flight += 1;
            session.max_in_flight = session.max_in_flight.max(session.state.in_flight);
            session.trace.push(TraceEvent::Sent(rev.rev_id));
            continue;
        }
        writer.flush()?;
        line.clear();
        if reader.read_line(&mut line).map_err(io_error)? == 0 {
            return Err(ServeError::ConnectionLost {
                answered: session.state.answered,
            });
        }
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if let Err(reason) = session.accept(trimmed) {
            let _ = writeln!(writer, "ERROR\t{reason}");
            let _ = writer.flush();
            return Err(ServeError::ProtocolViolation(reason));
        }
    }
    writeln!(writer, "END")?;
    writer.flush()?;

    let scores: Vec<(u64, String)> = examples
        .iter()
        .zip(session.answers)
        .map(|(e, a)| (e.revision.rev_id, a.unwrap_or_default()))
        .collect();
    let scored: Vec<ScoredExample> = examples
        .iter()
        .zip(&scores)
        .map(|(e, (id, s))| ScoredExample::new(*id, s.parse().unwrap_or(f64::NAN), e.label))
        .collect();
    let report = evaluate_scores(&scored)?;
    Ok(ServerOutcome {
        report,
        scores,
        trace: session.trace,
        max_in_flight: session.max_in_flight,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClientSummary {
    pub answered: usize,
}

/// Connect to a server and answer every revision with the pipeline's score.
pub fn run_client<A: ToSocketAddrs>(pipeline: &StackedPipeline, address: A) -> Result<ClientSummary, ServeError> {
    let stream = TcpStream::connect(address)?;
    client_stream(pipeline, stream)
}

pub fn client_stream(pipeline: &StackedPipeline, stream: TcpStream) -> Result<ClientSummary, ServeError> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut answered = 0;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).map_err(|e| lost(e, answered))? == 0 {
            return Err(ServeError::ConnectionLost { answered });
        }
        let trimmed = line.strip_suffix('\n').unwrap_or(&line);
        if trimmed == "END" {
            return Ok(ClientSummary { answered });
        }
        if let Some(reason) = trimmed.strip_prefix("ERROR\t") {
            return Err(ServeError::ServerError(reason.to_string()));
        }
        let body = trimmed
            .strip_prefix("REV\t")
            .ok_or_else(|| ServeError::MalformedServerLine(trimmed.to_string()))?;
        let rev = parse_line(body).map_err(|_| ServeError::MalformedServerLine(trimmed.to_string()))?;
        let score = pipeline.predict_revision(&rev)?;
        writeln!(writer, "SCORE\t{}\t{}", rev.rev_id, format_score(score)).map_err(|e| lost(e, answered))?;
        // Flush once the server has nothing more buffered for us.
        if reader.buffer().is_empty() {
            writer.flush().map_err(|e| lost(e, answered))?;
        }
        answered += 1;
    }
}
