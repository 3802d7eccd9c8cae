//! Primal game and cutting-with-margin (dual) game engines.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy_player::{max_entropy_over_cuts, EntropyPlayer, LinearCut};
use crate::error::{Error, Result};
use crate::geometry::{support_min_raw, SupportPool};
use crate::lp;
pub use crate::lp::HalfSpace;
use crate::model::{dot, l1, DistanceVector, HypothesisClass, TestDirection};
use crate::sampling::{progress_step, SampleOracle};

// ---------------------------------------------------------------------------
// Primal game
// ---------------------------------------------------------------------------

/// Picks `h_k in H_{P,eps}(u_k)`.
pub trait PrimalPlayer {
    fn play(&mut self, u: &DistanceVector, eps: f64, class: &HypothesisClass) -> Result<TestDirection>;
}

/// Answers `h_k` with `u_{k+1}`.
pub trait PrimalAdversary {
    fn respond(
        &mut self,
        u: &DistanceVector,
        h: &TestDirection,
        eps: f64,
        class: &HypothesisClass,
    ) -> Result<DistanceVector>;
}

/// Plays the max-entropy test of `{G >= eps + slack}`.
#[derive(Debug, Clone)]
pub struct MaxEntropyPrimalPlayer {
    inner: EntropyPlayer,
    slack: f64,
}

impl MaxEntropyPrimalPlayer {
    pub fn new(class: &HypothesisClass, slack: f64) -> Self {
        Self {
            inner: EntropyPlayer::new(class),
            slack,
        }
    }
}

impl PrimalPlayer for MaxEntropyPrimalPlayer {
    fn play(&mut self, u: &DistanceVector, eps: f64, _class: &HypothesisClass) -> Result<TestDirection> {
        let zeta = (self.slack / 2.0).min(1e-7);
        Ok(self.inner.solve(u.values(), eps + self.slack, zeta)?.h)
    }
}

/// Responds with `max(u, z)` where `z` comes from a progress step with `α = eps/2`.
#[derive(Debug, Clone)]
pub struct OracleAdversary {
    pub oracle: SampleOracle,
    pub beta: f64,
}

impl OracleAdversary {
    pub fn new(oracle: SampleOracle, beta: f64) -> Self {
        Self { oracle, beta }
    }
}

impl PrimalAdversary for OracleAdversary {
    fn respond(
        &mut self,
        u: &DistanceVector,
        h: &TestDirection,
        eps: f64,
        class: &HypothesisClass,
    ) -> Result<DistanceVector> {
        let out = progress_step(u, h, eps / 2.0, self.beta, &mut self.oracle, class)?;
        Ok(u.join(&out.z))
    }
}

/// Record of a primal game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalTranscript {
    /// `u_0, u_1, …`; one more entry than `tests`.
    pub points: Vec<DistanceVector>,
    pub tests: Vec<TestDirection>,
    pub eps: f64,
    pub rounds: usize,
    /// Whether the game ended with `H_{P,eps}(u)` empty up to the slack.
    pub finished: bool,
}

/// Engine settings for [`run_primal_game_with`].
#[derive(Debug, Clone, Copy)]
pub struct PrimalSettings {
    /// The game stops once `max_h G(h) <= eps + slack`.
    pub slack: f64,
    pub tol: f64,
}

const MOVE_TOL: f64 = 1e-9;

/// `u_next >= u_k` and `h_k · u_next >= min_{v in P} h_k · v - eps/2 - tol`.
pub fn validate_primal_move(
    u_k: &DistanceVector,
    h_k: &TestDirection,
    u_next: &DistanceVector,
    eps: f64,
    class: &HypothesisClass,
) -> bool {
    let n = class.len();
    if u_k.len() != n || h_k.len() != n || u_next.len() != n {
        return false;
    }
    if !u_next.dominates(u_k, 0.0) {
        return false;
    }
    let value = support_min_raw(h_k.weights(), class).value;
    u_next.dot(h_k) >= value - eps / 2.0 - MOVE_TOL
}

/// Runs the primal game with stopping slack `eps/8`.
pub fn run_primal_game(
    class: &HypothesisClass,
    eps: f64,
    player: &mut dyn PrimalPlayer,
    adversary: &mut dyn PrimalAdversary,
    max_rounds: usize,
) -> Result<PrimalTranscript> {
    let settings = PrimalSettings {
        slack: eps / 8.0,
        tol: 1e-9,
    };
    run_primal_game_with(class, eps, player, adversary, max_rounds, settings)
}

pub fn run_primal_game_with(
    class: &HypothesisClass,
    eps: f64,
    player: &mut dyn PrimalPlayer,
    adversary: &mut dyn PrimalAdversary,
    max_rounds: usize,
    settings: PrimalSettings,
) -> Result<PrimalTranscript> {
    if max_rounds == 0 {
        return Err(Error::InvalidParameter("max_rounds must be at least 1".into()));
    }
    let n = class.len();
    let mut pool = SupportPool::new(class);
    let mut u = DistanceVector::zeros(n);
    let mut transcript = PrimalTranscript {
        points: vec![u.clone()],
        tests: Vec::new(),
        eps,
        rounds: 0,
        finished: false,
    };
    let stop_at = eps + settings.slack;
    while transcript.rounds < max_rounds {
        let bounds = pool.max_margin(u.values(), settings.slack * 1e-3, Some(stop_at))?;
        if bounds.lower <= stop_at {
            transcript.finished = true;
            return Ok(transcript);
        }
        let round = transcript.rounds;
        let h = player.play(&u, eps, class)?;
        if h.len() != n {
            return Err(Error::IllegalMove {
                role: "player".into(),
                round,
                reason: format!("test has {} weights, expected {n}", h.len()),
            });
        }
        let g = support_min_raw(h.weights(), class).value - u.dot(&h);
        if !(g > eps) {
            return Err(Error::IllegalMove {
                role: "player".into(),
                round,
                reason: format!("margin {g} of the test does not exceed {eps}"),
            });
        }
        let next = adversary.respond(&u, &h, eps, class)?;
        if !validate_primal_move(&u, &h, &next, eps, class) {
            return Err(Error::IllegalMove {
                role: "adversary".into(),
                round,
                reason: "point decreases a coordinate or falls short of the test".into(),
            });
        }
        u = next;
        transcript.tests.push(h);
        transcript.points.push(u.clone());
        transcript.rounds += 1;
    }
    let bounds = pool.max_margin(u.values(), settings.slack * 1e-3, Some(stop_at))?;
    transcript.finished = bounds.lower <= stop_at;
    Ok(transcript)
}

// ---------------------------------------------------------------------------
// Dual game
// ---------------------------------------------------------------------------

/// Slack below which a cut-defined universe counts as empty.
pub const EMPTY_SLACK: f64 = 1e-9;

/// `Δ_n` intersected with cuts `g · h >= c`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualUniverse {
    n: usize,
    eps: f64,
    cuts: Vec<HalfSpace>,
}

impl DualUniverse {
    pub fn new(n: usize, eps: f64) -> Result<Self> {
        if n == 0 || !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dual game needs n >= 1 and eps > 0, got n={n}, eps={eps}"
            )));
        }
        Ok(Self {
            n,
            eps,
            cuts: Vec::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cuts(&self) -> &[HalfSpace] {
        &self.cuts
    }

    pub fn contains(&self, h: &[f64], tol: f64) -> bool {
        self.cuts.iter().all(|c| dot(&c.normal, h) >= c.offset - tol)
    }

    /// Largest uniform slack of the cuts, with the attaining point.
    pub fn max_slack(&self) -> Result<(f64, Vec<f64>)> {
        if self.cuts.is_empty() {
            return Ok((1.0, vec![1.0 / self.n as f64; self.n]));
        }
        lp::max_slack(self.n, &self.cuts)
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.max_slack()?.0 <= EMPTY_SLACK)
    }

    /// `max_{h in universe} objective · h`, or `None` when empty.
    pub fn maximize(&self, objective: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        lp::maximize_linear(self.n, &self.cuts, objective)
    }

    /// Whether the cut keeps the ℓ1 ball of radius `eps` around `h` out entirely.
    pub fn is_legal_cut(&self, cut: &HalfSpace, h: &[f64]) -> bool {
        let reach = cut.normal.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        dot(&cut.normal, h) + self.eps * reach <= cut.offset + 1e-12
    }

    pub(crate) fn push(&mut self, cut: HalfSpace) {
        self.cuts.push(cut);
    }
}

pub trait DualPlayer {
    fn pick(&mut self, universe: &DualUniverse) -> Result<TestDirection>;
}

pub trait DualAdversary {
    fn cut(&mut self, universe: &DualUniverse, h: &TestDirection) -> Result<HalfSpace>;
}

/// Max-entropy point of the universe.
#[derive(Debug, Clone, Default)]
pub struct MaxEntropyDualPlayer {
    working: Vec<usize>,
}

impl MaxEntropyDualPlayer {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DualPlayer for MaxEntropyDualPlayer {
    fn pick(&mut self, universe: &DualUniverse) -> Result<TestDirection> {
        let cuts: Vec<LinearCut> = universe
            .cuts()
            .iter()
            .map(|c| LinearCut {
                a: c.normal.clone(),
                b: c.offset,
            })
            .collect();
        let sol = max_entropy_over_cuts(universe.dimension(), &cuts, &mut self.working, 1e-12)?;
        TestDirection::normalized(sol.h)
    }
}

/// Deterministic vertex with the largest `Σ_i (n - i)/n · h_i`.
pub fn arbitrary_test_player(universe: &DualUniverse) -> Result<TestDirection> {
    let n = universe.dimension();
    let objective: Vec<f64> = (0..n).map(|i| (n - i) as f64 / n as f64).collect();
    if universe.is_empty()? {
        return Err(Error::EmptyUniverse);
    }
    match universe.maximize(&objective)? {
        Some((_, h)) => TestDirection::normalized(h),
        None => Err(Error::EmptyUniverse),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ArbitraryTestPlayer;

impl DualPlayer for ArbitraryTestPlayer {
    fn pick(&mut self, universe: &DualUniverse) -> Result<TestDirection> {
        arbitrary_test_player(universe)
    }
}

fn tight_cut(universe: &DualUniverse, g: Vec<f64>, h: &[f64]) -> HalfSpace {
    let reach = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let offset = dot(&g, h) + universe.eps() * reach;
    HalfSpace { normal: g, offset }
}

/// How far the universe reaches past the cut boundary; negative when the cut empties it.
fn depth(universe: &DualUniverse, cut: &HalfSpace) -> Result<f64> {
    Ok(match universe.maximize(&cut.normal)? {
        Some((v, _)) => v - cut.offset,
        None => f64::NEG_INFINITY,
    })
}

fn deepest(universe: &DualUniverse, h: &[f64], candidates: Vec<Vec<f64>>) -> Result<HalfSpace> {
    let mut best: Option<(f64, HalfSpace)> = None;
    for g in candidates {
        let cut = tight_cut(universe, g, h);
        let d = depth(universe, &cut)?;
        if best.as_ref().is_none_or(|(b, _)| d > *b) {
            best = Some((d, cut));
        }
    }
    best.map(|(_, c)| c)
        .ok_or_else(|| Error::InvalidParameter("no candidate cut".into()))
}

/// Cuts along `e_i - e_j` between the heaviest and lightest coordinates of `h_k`,
/// keeping whichever side leaves the most of the universe.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyDiameterAdversary;

impl DualAdversary for GreedyDiameterAdversary {
    fn cut(&mut self, universe: &DualUniverse, h: &TestDirection) -> Result<HalfSpace> {
        let w = h.weights();
        let n = w.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| w[*a].total_cmp(&w[*b]).then(a.cmp(b)));
        let low = &order[..2.min(n)];
        let high = &order[n - 2.min(n)..];
        let mut candidates = Vec::new();
        for &i in high.iter().rev() {
            for &j in low {
                if i == j {
                    continue;
                }
                let mut g = vec![0.0; n];
                g[i] = 1.0;
                g[j] = -1.0;
                let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                for cand in [g, neg] {
                    if !candidates.contains(&cand) {
                        candidates.push(cand);
                    }
                }
            }
        }
        if candidates.is_empty() {
            // n = 1: the universe is a single point and any nonzero cut empties it.
            candidates.push(vec![1.0]);
        }
        deepest(universe, w, candidates)
    }
}

/// Cuts along a random sign vector, keeping the larger side.
#[derive(Debug, Clone)]
pub struct RandomDirectionAdversary {
    rng: ChaCha8Rng,
}

impl RandomDirectionAdversary {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl DualAdversary for RandomDirectionAdversary {
    fn cut(&mut self, universe: &DualUniverse, h: &TestDirection) -> Result<HalfSpace> {
        let g: Vec<f64> = (0..h.len())
            .map(|_| if self.rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        deepest(universe, h.weights(), vec![g, neg])
    }
}

/// Turns a primal run into dual-game cuts: after the primal update at `h_k`, the
/// supergradient cut of `G_{u_{k+1}}` at `h_k` contains `H_{P,4 eps}(u_{k+1})`.
#[derive(Debug, Clone)]
pub struct PrimalInducedAdversary {
    pool: SupportPool,
    oracle: SampleOracle,
    u: DistanceVector,
    primal_eps: f64,
    beta: f64,
}

impl PrimalInducedAdversary {
    pub fn new(class: &HypothesisClass, oracle: SampleOracle, dual_eps: f64, beta: f64) -> Self {
        Self {
            pool: SupportPool::new(class),
            oracle,
            u: DistanceVector::zeros(class.len()),
            primal_eps: 4.0 * dual_eps,
            beta,
        }
    }

    pub fn point(&self) -> &DistanceVector {
        &self.u
    }
}

impl DualAdversary for PrimalInducedAdversary {
    fn cut(&mut self, _universe: &DualUniverse, h: &TestDirection) -> Result<HalfSpace> {
        let class = self.pool.class().clone();
        let alpha = (self.primal_eps / 2.0).min(0.5);
        let out = progress_step(&self.u, h, alpha, self.beta, &mut self.oracle, &class)?;
        self.u = self.u.join(&out.z);
        let bounds = self
            .pool
            .max_margin(self.u.values(), 1e-9, Some(self.primal_eps))?;
        if bounds.upper <= self.primal_eps {
            return Ok(HalfSpace {
                normal: vec![0.0; h.len()],
                offset: 1.0,
            });
        }
        let res = support_min_raw(h.weights(), &class);
        let g: Vec<f64> = res
            .support_point
            .iter()
            .zip(self.u.values())
            .map(|(v, u)| v - u)
            .collect();
        let margin = res.value - self.u.dot(h);
        let offset = dot(&g, h.weights()) + self.primal_eps - margin;
        Ok(HalfSpace { normal: g, offset })
    }
}

/// Record of a dual game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualTranscript {
    pub n: usize,
    pub eps: f64,
    pub picks: Vec<TestDirection>,
    /// Cut `k` answers `picks[k]`; stored as `(normal, offset)` keeping `normal · h >= offset`.
    pub cuts: Vec<(Vec<f64>, f64)>,
    pub rounds: usize,
    /// Whether the universe was empty when the game stopped.
    pub emptied: bool,
}

/// `⌈8 ln n / eps²⌉`.
pub fn dual_round_bound(n: usize, eps: f64) -> usize {
    (8.0 * (n as f64).ln() / (eps * eps)).ceil() as usize
}

pub fn run_dual_game(
    n: usize,
    eps: f64,
    player: &mut dyn DualPlayer,
    adversary: &mut dyn DualAdversary,
    max_rounds: usize,
) -> Result<DualTranscript> {
    if max_rounds == 0 {
        return Err(Error::InvalidParameter("max_rounds must be at least 1".into()));
    }
    let mut universe = DualUniverse::new(n, eps)?;
    let mut transcript = DualTranscript {
        n,
        eps,
        picks: Vec::new(),
        cuts: Vec::new(),
        rounds: 0,
        emptied: false,
    };
    while transcript.rounds < max_rounds {
        if universe.is_empty()? {
            transcript.emptied = true;
            return Ok(transcript);
        }
        let round = transcript.rounds;
        let h = player.pick(&universe)?;
        if h.len() != n {
            return Err(Error::IllegalMove {
                role: "player".into(),
                round,
                reason: format!("pick has {} weights, expected {n}", h.len()),
            });
        }
        let cut = adversary.cut(&universe, &h)?;
        if cut.normal.len() != n || !universe.is_legal_cut(&cut, h.weights()) {
            return Err(Error::IllegalMove {
                role: "adversary".into(),
                round,
                reason: "cut meets the excluded ball around the pick".into(),
            });
        }
        transcript.picks.push(h);
        transcript.cuts.push((cut.normal.clone(), cut.offset));
        universe.push(cut);
        transcript.rounds += 1;
    }
    transcript.emptied = universe.is_empty()?;
    Ok(transcript)
}

// ---------------------------------------------------------------------------
// Transcript text format
// ---------------------------------------------------------------------------

/// One line of a transcript: `round role v_1 v_2 …`.
#[derive(Debug, Clone, PartialEq)]
pub struct Move {
    pub round: usize,
    pub role: String,
    pub values: Vec<f64>,
}

/// Parsed transcript: header fields from `# key value` lines and the moves.
#[derive(Debug, Clone, PartialEq)]
pub struct TextTranscript {
    pub kind: String,
    pub eps: f64,
    pub moves: Vec<Move>,
}

fn push_line(out: &mut String, round: usize, role: &str, values: &[f64]) {
    write!(out, "{round} {role}").expect("writing to a string");
    for v in values {
        write!(out, " {v:.11e}").expect("writing to a string");
    }
    out.push('\n');
}

impl PrimalTranscript {
    /// Lines `k player h_k` and `k adversary u_{k+1}`, values at 12 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("# game primal\n# eps {:.11e}\n", self.eps);
        for (k, h) in self.tests.iter().enumerate() {
            push_line(&mut out, k, "player", h.weights());
            push_line(&mut out, k, "adversary", self.points[k + 1].values());
        }
        out
    }
}

impl DualTranscript {
    /// Lines `k player h_k` and `k adversary g_1 … g_n c`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# game dual\n# eps {:.11e}\n", self.eps);
        for (k, h) in self.picks.iter().enumerate() {
            push_line(&mut out, k, "player", h.weights());
            let (g, c) = &self.cuts[k];
            let mut vals = g.clone();
            vals.push(*c);
            push_line(&mut out, k, "adversary", &vals);
        }
        out
    }
}

pub fn parse_transcript(text: &str) -> Result<TextTranscript> {
    let mut kind = None;
    let mut eps = None;
    let mut moves = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("game"), Some(k)) => kind = Some(k.to_string()),
                (Some("eps"), Some(v)) => {
                    eps = Some(v.parse::<f64>().map_err(|e| {
                        Error::Parse(format!("line {}: bad eps: {e}", lineno + 1))
                    })?)
                }
                _ => {}
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let round = parts
            .next()
            .and_then(|r| r.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("line {}: missing round", lineno + 1)))?;
        let role = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: missing role", lineno + 1)))?
            .to_string();
        let values = parts
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        moves.push(Move { round, role, values });
    }
    Ok(TextTranscript {
        kind: kind.ok_or_else(|| Error::Parse("missing `# game` header".into()))?,
        eps: eps.ok_or_else(|| Error::Parse("missing `# eps` header".into()))?,
        moves,
    })
}

fn pairs(t: &TextTranscript) -> Result<Vec<(&Move, &Move)>> {
    if !t.moves.len().is_multiple_of(2) {
        return Err(Error::Parse("transcript ends mid-round".into()));
    }
    t.moves
        .chunks(2)
        .enumerate()
        .map(|(k, c)| {
            let (a, b) = (&c[0], &c[1]);
            if a.role != "player" || b.role != "adversary" || a.round != k || b.round != k {
                return Err(Error::Parse(format!("round {k} is malformed")));
            }
            Ok((a, b))
        })
        .collect()
}

/// Replays a primal transcript, checking every move.
///
/// Returns the number of rounds, or `IllegalMove` naming the first offender.
pub fn replay_primal(text: &str, class: &HypothesisClass) -> Result<usize> {
    let t = parse_transcript(text)?;
    if t.kind != "primal" {
        return Err(Error::Parse(format!("expected a primal transcript, got `{}`", t.kind)));
    }
    let mut u = DistanceVector::zeros(class.len());
    let rounds = pairs(&t)?;
    for (k, (p, a)) in rounds.iter().enumerate() {
        let h = TestDirection::normalized(p.values.clone())?;
        let g = support_min_raw(h.weights(), class).value - u.dot(&h);
        if !(g > t.eps - 1e-9) {
            return Err(Error::IllegalMove {
                role: "player".into(),
                round: k,
                reason: format!("margin {g} does not exceed {}", t.eps),
            });
        }
        let next = DistanceVector::clamped(a.values.clone());
        // Values carry 12 significant digits; allow for the rounding.
        let lifted = DistanceVector::clamped(
            next.values()
                .iter()
                .zip(u.values())
                .map(|(x, y)| if (x - y).abs() <= 1e-11 { y.max(*x) } else { *x })
                .collect(),
        );
        if !validate_primal_move(&u, &h, &lifted, t.eps + 1e-9, class) {
            return Err(Error::IllegalMove {
                role: "adversary".into(),
                round: k,
                reason: "move fails the primal rule on replay".into(),
            });
        }
        u = lifted;
    }
    Ok(rounds.len())
}

/// Replays a dual transcript, checking cut legality and that each pick lies in the universe.
pub fn replay_dual(text: &str) -> Result<usize> {
    let t = parse_transcript(text)?;
    if t.kind != "dual" {
        return Err(Error::Parse(format!("expected a dual transcript, got `{}`", t.kind)));
    }
    let rounds = pairs(&t)?;
    let n = rounds.first().map(|(p, _)| p.values.len()).unwrap_or(1);
    let mut universe = DualUniverse::new(n, t.eps)?;
    for (k, (p, a)) in rounds.iter().enumerate() {
        if p.values.len() != n || a.values.len() != n + 1 {
            return Err(Error::Parse(format!("round {k} has the wrong arity")));
        }
        if !universe.contains(&p.values, 1e-8) {
            return Err(Error::IllegalMove {
                role: "player".into(),
                round: k,
                reason: "pick lies outside the universe".into(),
            });
        }
        let cut = HalfSpace {
            normal: a.values[..n].to_vec(),
            offset: a.values[n],
        };
        let reach = cut.normal.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if dot(&cut.normal, &p.values) + t.eps * reach > cut.offset + 1e-9 {
            return Err(Error::IllegalMove {
                role: "adversary".into(),
                round: k,
                reason: "cut meets the excluded ball".into(),
            });
        }
        universe.push(cut);
    }
    Ok(rounds.len())
}

/// `ℓ1` distance between consecutive picks.
pub fn pick_steps(t: &DualTranscript) -> Vec<f64> {
    t.picks
        .windows(2)
        .map(|w| l1(w[0].weights(), w[1].weights()))
        .collect()
}
