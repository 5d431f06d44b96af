//! Scores, pairwise margins, the bidirectional rank loss with its analytic
//! gradient, and pairwise ranking accuracy.
//!
//! Frames inside a window are addressed by signed offsets `k ∈ [−T, T]`
//! from the center frame. A pair `(a, b)` asks that frame `a` (closer to the
//! center) score strictly higher than frame `b` (farther away, same side).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, frobenius_inner, Real, Tensor};
use crate::seqgen::Window;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Oracle,
    Network,
    RankPooling,
    Random,
}

/// A frame-shaped kernel that scores frames by inner product.
#[derive(Clone, Debug, PartialEq)]
pub struct DynRep<T: Real = f32> {
    pub d: Tensor<T>,
    pub origin: Origin,
    /// Half-width `T` the kernel was solved or trained for.
    pub level: usize,
}

impl<T: Real> DynRep<T> {
    pub fn new(d: Tensor<T>, origin: Origin, level: usize) -> Self {
        DynRep { d, origin, level }
    }

    pub fn zeros(shape: &[usize], origin: Origin, level: usize) -> Self {
        DynRep::new(Tensor::zeros(shape), origin, level)
    }

    pub fn cast<U: Real>(&self) -> DynRep<U> {
        DynRep::new(self.d.cast(), self.origin, self.level)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Past,
    Future,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pair {
    /// Offset of the frame that should score higher.
    pub a: i64,
    /// Offset of the frame farther from the center.
    pub b: i64,
    pub side: Side,
}

/// Whether pairs anchored on the center frame (`a = t`) take part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterPairs {
    /// Summation ranges of the loss: `a` runs up to and including the center.
    #[default]
    Include,
    /// Strict same-side pairs only, `(a − t)(b − t) > 0`.
    Exclude,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairSet {
    pub half_width: usize,
    pub pairs: Vec<Pair>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Pair> {
        self.pairs.iter()
    }
}

/// All past-side pairs `t−T ≤ b < a ≤ t` followed by all future-side pairs
/// `t ≤ a < b ≤ t+T`; `T(T+1)` pairs in total.
pub fn enumerate_pairs(half_width: usize) -> PairSet {
    enumerate_pairs_with(half_width, CenterPairs::Include)
}

pub fn enumerate_pairs_with(half_width: usize, center: CenterPairs) -> PairSet {
    let t = half_width as i64;
    let inner = match center {
        CenterPairs::Include => 0,
        CenterPairs::Exclude => 1,
    };
    let mut pairs = Vec::new();
    for b in -t..0 {
        for a in (b + 1)..=-inner {
            pairs.push(Pair { a, b, side: Side::Past });
        }
    }
    for a in inner..t {
        for b in (a + 1)..=t {
            pairs.push(Pair { a, b, side: Side::Future });
        }
    }
    PairSet { half_width, pairs }
}

/// `S(d, v) = ⟨d, v⟩`.
pub fn score<T: Real>(d: &DynRep<T>, v: &Tensor<T>) -> Result<T> {
    frobenius_inner(&d.d, v)
}

fn check_pair(half_width: usize, a: i64, b: i64) -> Result<()> {
    let t = half_width as i64;
    let fail = |reason: &str| {
        Err(Error::InvalidPair {
            a,
            b,
            reason: reason.to_string(),
        })
    };
    if a.abs() > t || b.abs() > t {
        return fail("offsets must lie within [t − T, t + T]");
    }
    if a.abs() >= b.abs() {
        return fail("requires |a − t| < |b − t|");
    }
    if a != 0 && a * b <= 0 {
        return fail("requires (a − t)(b − t) > 0 (both frames on the same side of t)");
    }
    Ok(())
}

/// Margin `δ_ab = S(d, V_a) − S(d, V_b)` for offsets `a`, `b` relative to the center.
pub fn delta<T: Real>(d: &DynRep<T>, w: &Window<T>, a: i64, b: i64) -> Result<T> {
    check_pair(w.half_width, a, b)?;
    Ok(score(d, w.at(a))? - score(d, w.at(b))?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankLossParams {
    /// Weight of the `‖d‖²` regularizer.
    pub gamma: f64,
    /// Constant offset subtracted from the loss.
    pub epsilon: f64,
    /// Margin each pair must clear before its hinge switches off.
    pub theta: f64,
    /// Optional ceiling; above it the loss is clamped and its gradient zeroed.
    #[serde(default)]
    pub max_loss: Option<f64>,
    /// Subtract each frame's own mean before scoring.
    #[serde(default)]
    pub mean_center: bool,
    #[serde(default)]
    pub center_pairs: CenterPairs,
}

impl Default for RankLossParams {
    fn default() -> Self {
        RankLossParams {
            gamma: 1e-3,
            epsilon: 0.0,
            theta: 0.1,
            max_loss: None,
            mean_center: false,
            center_pairs: CenterPairs::Include,
        }
    }
}

impl RankLossParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("epsilon", self.epsilon), ("theta", self.theta)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("rank-loss {name} = {v}")));
            }
        }
        if self.gamma < 0.0 || self.theta < 0.0 {
            return Err(Error::invalid(format!(
                "gamma and theta must be ≥ 0 (gamma = {}, theta = {})",
                self.gamma, self.theta
            )));
        }
        Ok(())
    }
}

/// Margin scaled to the data: `fraction × mean ‖V‖_F` over `frames`.
pub fn data_scaled_theta<'a>(frames: impl IntoIterator<Item = &'a Tensor<f32>>, fraction: f64) -> f64 {
    let (mut total, mut n) = (0.0f64, 0usize);
    for f in frames {
        total += f.cast::<f64>().norm_sq().sqrt();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        fraction * total / n as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankLossReport<T: Real = f32> {
    pub loss: f64,
    pub margins: Vec<(Pair, f64)>,
    /// Pairs with `θ − δ_ab > 0`.
    pub violated: Vec<Pair>,
    /// `∂L/∂d`.
    pub grad_d: Tensor<T>,
    pub params: RankLossParams,
    /// True when `max_loss` clamped the value.
    pub clipped: bool,
}

impl<T: Real> RankLossReport<T> {
    pub fn all_satisfied(&self) -> bool {
        self.violated.is_empty()
    }
}

fn scored_frames<T: Real>(w: &Window<T>, mean_center: bool) -> Vec<Tensor<T>> {
    w.frames
        .iter()
        .map(|f| {
            if mean_center {
                let m = f.mean();
                f.map(|v| v - m)
            } else {
                f.clone()
            }
        })
        .collect()
}

/// Bidirectional rank loss
/// `L = γ‖d‖² − ε + Σ_pairs max(0, θ − δ_ab)` and its gradient
/// `∂L/∂d = 2γd − Σ_violated (V_a − V_b)`.
pub fn rank_loss<T: Real>(d: &DynRep<T>, w: &Window<T>, params: &RankLossParams) -> Result<RankLossReport<T>> {
    params.validate()?;
    if !d.d.is_finite() {
        return Err(Error::NonFinite("dynamic representation".into()));
    }
    if let Some(i) = w.frames.iter().position(|f| !f.is_finite()) {
        return Err(Error::NonFinite(format!("window frame {i}")));
    }
    d.d.check_same_shape(&w.frames[0], "rank_loss")?;

    let frames = scored_frames(w, params.mean_center);
    let scores: Vec<f64> = frames.iter().map(|f| dot(d.d.data(), f.data()).as_f64()).collect();
    let t = w.half_width as i64;
    let pairs = enumerate_pairs_with(w.half_width, params.center_pairs);

    let mut hinge = 0.0f64;
    let mut margins = Vec::with_capacity(pairs.len());
    let mut violated = Vec::new();
    let mut coef = vec![0i64; w.len()];
    for p in pairs.iter() {
        let m = scores[(p.a + t) as usize] - scores[(p.b + t) as usize];
        margins.push((*p, m));
        let slack = params.theta - m;
        if slack > 0.0 {
            hinge += slack;
            violated.push(*p);
            coef[(p.a + t) as usize] += 1;
            coef[(p.b + t) as usize] -= 1;
        }
    }
    let norm_sq = d.d.cast::<f64>().norm_sq();
    let mut loss = params.gamma * norm_sq - params.epsilon + hinge;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("rank loss = {loss}")));
    }

    let mut clipped = false;
    let grad_d = match params.max_loss {
        Some(cap) if loss > cap => {
            loss = cap;
            clipped = true;
            Tensor::zeros(d.d.shape())
        }
        _ => {
            let mut g = d.d.scale(T::of(2.0 * params.gamma));
            for (f, &c) in frames.iter().zip(&coef) {
                if c != 0 {
                    g.axpy(T::of(-(c as f64)), f)?;
                }
            }
            g
        }
    };
    Ok(RankLossReport {
        loss,
        margins,
        violated,
        grad_d,
        params: params.clone(),
        clipped,
    })
}

/// Fraction of pairs with `δ_ab > 0`; ties count as wrong.
pub fn ranking_accuracy<T: Real>(d: &DynRep<T>, w: &Window<T>) -> Result<f64> {
    ranking_accuracy_with(d, w, CenterPairs::Include)
}

pub fn ranking_accuracy_with<T: Real>(d: &DynRep<T>, w: &Window<T>, center: CenterPairs) -> Result<f64> {
    let pairs = enumerate_pairs_with(w.half_width, center);
    if pairs.is_empty() {
        return Err(Error::invalid(format!(
            "window with T = {} has no pairs to rank",
            w.half_width
        )));
    }
    d.d.check_same_shape(&w.frames[0], "ranking_accuracy")?;
    let scores: Vec<T> = w.frames.iter().map(|f| dot(d.d.data(), f.data())).collect();
    let t = w.half_width as i64;
    let correct = pairs
        .iter()
        .filter(|p| scores[(p.a + t) as usize] - scores[(p.b + t) as usize] > T::zero())
        .count();
    Ok(correct as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, Rng};
    use proptest::prelude::*;

    fn random_window(rng: &mut Rng, half_width: usize, dims: &[usize]) -> Window<f64> {
        let frames = (0..2 * half_width + 1)
            .map(|_| rng.uniform_tensor::<f64>(dims, 0.0, 1.0))
            .collect();
        Window::from_frames(frames, 1).unwrap()
    }

    /// Brute-force pair list: every (a, b) satisfying the ordering predicate.
    fn brute_pairs(t: i64) -> usize {
        let mut n = 0;
        for a in -t..=t {
            for b in -t..=t {
                let closer = a.abs() < b.abs();
                let same_side = a * b > 0 || (a == 0 && b != 0);
                if closer && same_side {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn pair_counts() {
        assert!(enumerate_pairs(0).is_empty());
        assert_eq!(enumerate_pairs(3).len(), 12);
        assert_eq!(enumerate_pairs(5).len(), 30);
        for t in 0..10 {
            assert_eq!(enumerate_pairs(t).len(), brute_pairs(t as i64));
            assert_eq!(enumerate_pairs(t).len(), t * (t + 1));
            assert_eq!(
                enumerate_pairs_with(t, CenterPairs::Exclude).len(),
                t * t.saturating_sub(1)
            );
        }
    }

    #[test]
    fn pair_ranges() {
        for p in enumerate_pairs(4).iter() {
            match p.side {
                Side::Past => assert!(-4 <= p.b && p.b < p.a && p.a <= 0),
                Side::Future => assert!(0 <= p.a && p.a < p.b && p.b <= 4),
            }
        }
    }

    #[test]
    fn score_basics() {
        let v = Tensor::<f64>::ones(&[3, 4, 5]);
        assert_eq!(score(&DynRep::zeros(&[3, 4, 5], Origin::Oracle, 1), &v).unwrap(), 0.0);
        let ones = DynRep::new(Tensor::ones(&[3, 4, 5]), Origin::Oracle, 1);
        assert_eq!(score(&ones, &v).unwrap(), 60.0);
    }

    #[test]
    fn score_matches_direct_sum() {
        let mut rng = Rng::new(1);
        let d = DynRep::new(rng.normal_tensor::<f64>(&[2, 3, 3], 1.0), Origin::Random, 0);
        let v = rng.normal_tensor::<f64>(&[2, 3, 3], 1.0);
        let mut direct = 0.0;
        for i in 0..18 {
            direct += d.d.data()[i] * v.data()[i];
        }
        assert!((score(&d, &v).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn delta_rejects_invalid_pairs() {
        let w = random_window(&mut Rng::new(2), 2, &[1, 2, 2]);
        let d = DynRep::zeros(&[1, 2, 2], Origin::Random, 2);
        let e = delta(&d, &w, 1, -2).unwrap_err().to_string();
        assert!(e.contains("same side"), "{e}");
        let e = delta(&d, &w, 2, 1).unwrap_err().to_string();
        assert!(e.contains("|a − t| < |b − t|"), "{e}");
        assert!(delta(&d, &w, 0, 3).is_err());
        assert_eq!(delta(&d, &w, 0, -2).unwrap(), 0.0);
        assert_eq!(delta(&d, &w, -1, -2).unwrap(), 0.0);
    }

    #[test]
    fn delta_on_constant_window_vanishes() {
        let mut rng = Rng::new(3);
        let f = rng.uniform_tensor::<f64>(&[1, 3, 3], 0.0, 1.0);
        let w = Window::from_frames(vec![f; 5], 1).unwrap();
        let d = DynRep::new(rng.normal_tensor(&[1, 3, 3], 1.0), Origin::Random, 2);
        for p in enumerate_pairs(2).iter() {
            assert_eq!(delta(&d, &w, p.a, p.b).unwrap(), 0.0);
        }
    }

    #[test]
    fn delta_signs_on_ramp_match_enumerated_scores() {
        // Frames k·1 for k = 0..7; with d = V_t, scores are k·t·n, so past pairs
        // are positive and future pairs negative. Enumerate scores directly.
        let frames: Vec<Tensor<f64>> = (0..7).map(|k| Tensor::filled(&[1, 2, 2], k as f64 + 1.0)).collect();
        let w = Window::from_frames(frames, 1).unwrap();
        let d = DynRep::new(w.center_frame().clone(), Origin::Random, 3);
        let scores: Vec<f64> = (0..7).map(|k| 4.0 * 4.0 * (k as f64 + 1.0)).collect();
        for p in enumerate_pairs(3).iter() {
            let expect = scores[(p.a + 3) as usize] - scores[(p.b + 3) as usize];
            assert_eq!(delta(&d, &w, p.a, p.b).unwrap(), expect);
            assert_eq!(expect > 0.0, p.side == Side::Past);
        }
    }

    #[test]
    fn zero_kernel_loss_is_closed_form() {
        let w = random_window(&mut Rng::new(4), 3, &[3, 4, 4]);
        let params = RankLossParams {
            gamma: 0.3,
            epsilon: 0.25,
            theta: 0.5,
            ..Default::default()
        };
        let r = rank_loss(&DynRep::zeros(&[3, 4, 4], Origin::Random, 3), &w, &params).unwrap();
        assert_eq!(r.loss, -0.25 + 12.0 * 0.5);
        assert_eq!(r.violated.len(), 12);
        // Every hinge is active at d = 0, so only the regularizer term vanishes.
        let mut expect = Tensor::<f64>::zeros(&[3, 4, 4]);
        for p in enumerate_pairs(3).iter() {
            expect.axpy(-1.0, &w.at(p.a).sub(w.at(p.b)).unwrap()).unwrap();
        }
        for (g, e) in r.grad_d.data().iter().zip(expect.data()) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_window_loss_is_closed_form() {
        let mut rng = Rng::new(14);
        for t in [3usize, 5, 9] {
            let f = rng.uniform_tensor::<f64>(&[2, 3, 3], 0.0, 1.0);
            let w = Window::from_frames(vec![f; 2 * t + 1], 1).unwrap();
            let d = DynRep::new(rng.normal_tensor::<f64>(&[2, 3, 3], 1.0), Origin::Random, t);
            let params = RankLossParams { gamma: 0.2, epsilon: 0.1, theta: 0.3, ..Default::default() };
            let r = rank_loss(&d, &w, &params).unwrap();
            let expect = 0.2 * d.d.norm_sq() - 0.1 + (t * (t + 1)) as f64 * 0.3;
            assert!((r.loss - expect).abs() < 1e-12);
            for (g, e) in r.grad_d.data().iter().zip(d.d.scale(0.4).data()) {
                assert!((g - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(5);
        let w = random_window(&mut rng, 3, &[3, 8, 8]);
        let d = DynRep::new(rng.normal_tensor::<f64>(&[3, 8, 8], 0.1), Origin::Random, 3);
        let params = RankLossParams {
            gamma: 0.01,
            theta: 0.5,
            ..Default::default()
        };
        let r = rank_loss(&d, &w, &params).unwrap();
        assert!(!r.violated.is_empty() && r.violated.len() < 12);
        let f = |x: &Tensor<f64>| rank_loss(&DynRep::new(x.clone(), Origin::Random, 3), &w, &params).unwrap().loss;
        let err = finite_diff_check(f, &d.d, &r.grad_d, 1e-6).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn max_loss_clamps() {
        let w = random_window(&mut Rng::new(6), 2, &[1, 3, 3]);
        let params = RankLossParams {
            theta: 1.0,
            max_loss: Some(2.0),
            ..Default::default()
        };
        let r = rank_loss(&DynRep::zeros(&[1, 3, 3], Origin::Random, 2), &w, &params).unwrap();
        assert!(r.clipped);
        assert_eq!(r.loss, 2.0);
        assert_eq!(r.grad_d.max_abs(), 0.0);
    }

    #[test]
    fn non_finite_input_is_error() {
        let w = random_window(&mut Rng::new(7), 1, &[1, 2, 2]);
        let mut d = DynRep::zeros(&[1, 2, 2], Origin::Random, 1);
        d.d.data_mut()[0] = f64::NAN;
        assert!(matches!(rank_loss(&d, &w, &RankLossParams::default()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn accuracy_edge_cases() {
        let w = random_window(&mut Rng::new(8), 3, &[1, 3, 3]);
        assert_eq!(ranking_accuracy(&DynRep::zeros(&[1, 3, 3], Origin::Random, 3), &w).unwrap(), 0.0);
        let w0 = random_window(&mut Rng::new(8), 0, &[1, 3, 3]);
        assert!(ranking_accuracy(&DynRep::zeros(&[1, 3, 3], Origin::Random, 0), &w0).is_err());
    }

    #[test]
    fn mean_centering_shifts_margins_by_kernel_sum() {
        let mut rng = Rng::new(9);
        let w = random_window(&mut rng, 2, &[1, 3, 3]);
        let d = DynRep::new(rng.normal_tensor::<f64>(&[1, 3, 3], 1.0), Origin::Random, 2);
        let raw = rank_loss(&d, &w, &RankLossParams::default()).unwrap();
        let centered = rank_loss(
            &d,
            &w,
            &RankLossParams {
                mean_center: true,
                ..Default::default()
            },
        )
        .unwrap();
        let ksum = d.d.sum();
        for ((p, m0), (_, m1)) in raw.margins.iter().zip(&centered.margins) {
            let shift = ksum * (w.at(p.b).mean() - w.at(p.a).mean());
            assert!((m1 - (m0 + shift)).abs() < 1e-10);
        }
    }

    fn window_and_kernel() -> impl Strategy<Value = (usize, u64)> {
        (1usize..6, any::<u64>())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn accuracy_is_scale_invariant((t, seed) in window_and_kernel(), alpha in 0.01f64..100.0) {
            let mut rng = Rng::new(seed);
            let w = random_window(&mut rng, t, &[2, 3, 3]);
            let d = DynRep::new(rng.normal_tensor::<f64>(&[2, 3, 3], 1.0), Origin::Random, t);
            let scaled = DynRep::new(d.d.scale(alpha), Origin::Random, t);
            prop_assert_eq!(ranking_accuracy(&d, &w).unwrap(), ranking_accuracy(&scaled, &w).unwrap());
            let v = w.at(0);
            let lhs = score(&scaled, v).unwrap();
            prop_assert!((lhs - alpha * score(&d, v).unwrap()).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }

        #[test]
        fn loss_is_invariant_under_time_reversal((t, seed) in window_and_kernel()) {
            let mut rng = Rng::new(seed);
            let w = random_window(&mut rng, t, &[2, 3, 3]);
            let d = DynRep::new(rng.normal_tensor::<f64>(&[2, 3, 3], 0.5), Origin::Random, t);
            let params = RankLossParams { theta: 0.2, ..Default::default() };
            let fwd = rank_loss(&d, &w, &params).unwrap();
            let rev = rank_loss(&d, &w.reversed(), &params).unwrap();
            prop_assert!((fwd.loss - rev.loss).abs() <= 1e-12 * (1.0 + fwd.loss.abs()));
            prop_assert_eq!(fwd.violated.len(), rev.violated.len());
            let mut mapped: Vec<(i64, i64)> = enumerate_pairs(t).iter().map(|p| (-p.a, -p.b)).collect();
            let mut own: Vec<(i64, i64)> = enumerate_pairs(t).iter().map(|p| (p.a, p.b)).collect();
            mapped.sort_unstable();
            own.sort_unstable();
            prop_assert_eq!(mapped, own);
        }

        #[test]
        fn gradient_identity_and_lower_bound((t, seed) in window_and_kernel()) {
            let mut rng = Rng::new(seed);
            let w = random_window(&mut rng, t, &[1, 4, 4]);
            let d = DynRep::new(rng.normal_tensor::<f64>(&[1, 4, 4], 0.3), Origin::Random, t);
            let params = RankLossParams { gamma: 0.05, epsilon: 0.7, theta: 0.3, ..Default::default() };
            let r = rank_loss(&d, &w, &params).unwrap();
            // literal sum over violated pairs
            let mut expect = d.d.scale(2.0 * params.gamma);
            for p in &r.violated {
                expect.axpy(-1.0, &w.at(p.a).sub(w.at(p.b)).unwrap()).unwrap();
            }
            for (g, e) in r.grad_d.data().iter().zip(expect.data()) {
                prop_assert!((g - e).abs() <= 1e-12 * (1.0 + e.abs()));
            }
            prop_assert!(r.loss >= -params.epsilon);
            if r.violated.is_empty() {
                prop_assert!((r.loss - (params.gamma * d.d.norm_sq() - params.epsilon)).abs() < 1e-12);
            }
        }

        #[test]
        fn perfect_accuracy_implies_center_dominance((t, seed) in window_and_kernel()) {
            let mut rng = Rng::new(seed);
            let w = random_window(&mut rng, t, &[1, 3, 3]);
            // Kernel = center frame minus mean of the others: often, not always, perfect.
            let mut d = w.center_frame().clone();
            for k in -(t as i64)..=(t as i64) {
                if k != 0 {
                    d.axpy(-1.0 / (2 * t) as f64, w.at(k)).unwrap();
                }
            }
            let d = DynRep::new(d, Origin::Random, t);
            if ranking_accuracy(&d, &w).unwrap() == 1.0 {
                let center = score(&d, w.center_frame()).unwrap();
                for k in -(t as i64)..=(t as i64) {
                    if k != 0 {
                        prop_assert!(center > score(&d, w.at(k)).unwrap());
                    }
                }
            }
        }
    }
}
