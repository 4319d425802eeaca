//! Quantum channels in Kraus form, their Choi states, and measure-and-prepare
//! (entanglement-breaking) channels.

use std::fmt;

use crate::error::{Error, Result};
use crate::qmat::text::{next_content, read_matrix};
use crate::qmat::{max_entangled, CMatrix, DensityMatrix, Povm, Subsystem, Tolerances};

/// Completely positive trace-preserving map `d_in -> d_out`.
#[derive(Debug, Clone)]
pub struct Channel {
    d_in: usize,
    d_out: usize,
    kraus: Vec<CMatrix>,
}

impl Channel {
    /// Validates `sum_i K_i^dag K_i = I` within the PSD slack.
    pub fn new(d_in: usize, d_out: usize, kraus: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerances(d_in, d_out, kraus, &Tolerances::default())
    }

    pub fn with_tolerances(d_in: usize, d_out: usize, kraus: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidChannel("no Kraus operators".into()));
        }
        if let Some(k) = kraus.iter().find(|k| k.rows() != d_out || k.cols() != d_in) {
            return Err(Error::InvalidChannel(format!(
                "Kraus operator is {}x{}, expected {d_out}x{d_in}",
                k.rows(),
                k.cols()
            )));
        }
        let mut sum = CMatrix::zeros(d_in, d_in);
        for k in &kraus {
            sum += &k.adjoint().matmul(k);
        }
        let err = sum.max_abs_diff(&CMatrix::identity(d_in));
        if err > tol.psd {
            return Err(Error::InvalidChannel(format!(
                "not trace preserving: |sum K^dag K - I| = {err:.3e}"
            )));
        }
        Ok(Channel { d_in, d_out, kraus })
    }

    pub fn identity(d: usize) -> Self {
        Channel {
            d_in: d,
            d_out: d,
            kraus: vec![CMatrix::identity(d)],
        }
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// `sum_i K_i m K_i^dag` on an arbitrary (not necessarily positive) operator.
    pub fn apply_operator(&self, m: &CMatrix) -> Result<CMatrix> {
        if m.rows() != self.d_in || m.cols() != self.d_in {
            return Err(Error::dims(format!(
                "channel input is {}-dimensional, operator is {}x{}",
                self.d_in,
                m.rows(),
                m.cols()
            )));
        }
        let mut out = CMatrix::zeros(self.d_out, self.d_out);
        for k in &self.kraus {
            out += &k.matmul(m).matmul(&k.adjoint());
        }
        Ok(out)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let out = self.apply_operator(rho.matrix())?;
        Ok(DensityMatrix::from_trusted(out.hermitian_part()))
    }

    /// `sigma_N = (id (x) N)(Phi_+)` on `A' (x) B`.
    pub fn choi_state(&self) -> ChoiState {
        let (da, db) = (self.d_in, self.d_out);
        let phi = max_entangled(da.max(2)).expect("d >= 2");
        let phi = if da == 1 { CMatrix::identity(1) } else { phi.into_matrix() };
        let mut sigma = CMatrix::zeros(da * db, da * db);
        for k in &self.kraus {
            let ik = CMatrix::identity(da).kron(k);
            sigma += &ik.matmul(&phi).matmul(&ik.adjoint());
        }
        ChoiState {
            d_a: da,
            d_b: db,
            state: DensityMatrix::from_trusted(sigma.hermitian_part()),
        }
    }

    /// Parses the `channel d_in d_out n_kraus` file format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (ln, header) = next_content(&mut lines).ok_or_else(|| Error::parse(1, "empty channel file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.first() != Some(&"channel") || fields.len() != 4 {
            return Err(Error::parse(ln, "expected `channel <d_in> <d_out> <n_kraus>`"));
        }
        let nums: Vec<usize> = fields[1..]
            .iter()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(ln, format!("bad channel header: {e}")))?;
        let (d_in, d_out, n) = (nums[0], nums[1], nums[2]);
        let kraus = (0..n)
            .map(|_| read_matrix(&mut lines))
            .collect::<Result<Vec<_>>>()?;
        if let Some((ln, rest)) = next_content(&mut lines) {
            return Err(Error::parse(ln, format!("trailing content `{rest}`")));
        }
        Channel::new(d_in, d_out, kraus)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("channel {} {} {}\n", self.d_in, self.d_out, self.kraus.len());
        for k in &self.kraus {
            out.push_str(&crate::qmat::text::write_matrix(k));
        }
        out
    }
}

/// Choi state of a channel with its `tr_B sigma = I/d_A` marginal.
#[derive(Debug, Clone)]
pub struct ChoiState {
    d_a: usize,
    d_b: usize,
    state: DensityMatrix,
}

impl ChoiState {
    /// Validates the marginal condition `tr_B[sigma] = I/d_A`.
    pub fn new(state: DensityMatrix, d_a: usize, d_b: usize) -> Result<Self> {
        let marg = state.matrix().partial_trace(Subsystem::B, d_a, d_b)?;
        let err = marg.max_abs_diff(&CMatrix::identity(d_a).scale(1.0 / d_a as f64));
        if err > crate::qmat::TOL_PSD {
            return Err(Error::InvalidState(format!(
                "A-marginal differs from I/d_A by {err:.3e}"
            )));
        }
        Ok(ChoiState { d_a, d_b, state })
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn matrix(&self) -> &CMatrix {
        self.state.matrix()
    }

    /// Smallest eigenvalue of the partial transpose on B.
    pub fn min_pt_eigenvalue(&self) -> f64 {
        self.matrix()
            .partial_transpose(Subsystem::B, self.d_a, self.d_b)
            .and_then(|pt| pt.min_eigenvalue())
            .expect("Choi state has consistent dimensions")
    }
}

/// Parameters of a measure-and-prepare channel `rho -> sum_k tr[E_k rho] t_k tau_k`.
///
/// The optional weights `t_k` are only meaningful inside the bound optimizers,
/// where they describe the sub-normalized output states of an untrusted
/// joint measurement.
#[derive(Debug, Clone)]
pub struct EbChannelParams {
    povm: Povm,
    states: Vec<DensityMatrix>,
    subnorm: Option<Vec<f64>>,
}

impl EbChannelParams {
    pub fn new(povm: Povm, states: Vec<DensityMatrix>) -> Result<Self> {
        Self::with_subnorm(povm, states, None)
    }

    pub fn with_subnorm(povm: Povm, states: Vec<DensityMatrix>, subnorm: Option<Vec<f64>>) -> Result<Self> {
        if povm.len() != states.len() {
            return Err(Error::InvalidArgument(format!(
                "{} POVM effects but {} output states",
                povm.len(),
                states.len()
            )));
        }
        if let Some(d) = states.first().map(DensityMatrix::dim) {
            if states.iter().any(|s| s.dim() != d) {
                return Err(Error::InvalidArgument("output states of different dimensions".into()));
            }
        }
        if let Some(t) = &subnorm {
            if t.len() != states.len() {
                return Err(Error::InvalidArgument("one weight per outcome required".into()));
            }
            if let Some(bad) = t.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                return Err(Error::InvalidArgument(format!("weight {bad} outside [0, 1]")));
            }
        }
        Ok(EbChannelParams { povm, states, subnorm })
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn subnorm(&self) -> Option<&[f64]> {
        self.subnorm.as_deref()
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.subnorm.as_ref().map_or(1.0, |t| t[k])
    }

    pub fn d_in(&self) -> usize {
        self.povm.dim()
    }

    pub fn d_out(&self) -> usize {
        self.states[0].dim()
    }

    pub fn is_normalized(&self) -> bool {
        (0..self.states.len()).all(|k| self.weight(k) >= 1.0 - 1e-12)
    }
}

/// Kraus realization of the measure-and-prepare channel.
///
/// With `E_k = sum_j mu_kj |e_kj><e_kj|` and `tau_k = sum_i lambda_ki |phi_ki><phi_ki|`,
/// the operators `sqrt(lambda_ki mu_kj) |phi_ki><e_kj|` reproduce `sum_k tr[E_k rho] tau_k`.
pub fn eb_channel(params: &EbChannelParams) -> Result<Channel> {
    if !params.is_normalized() {
        return Err(Error::InvalidArgument(
            "sub-normalized outputs do not define a trace-preserving channel".into(),
        ));
    }
    let (d_in, d_out) = (params.d_in(), params.d_out());
    let mut kraus = Vec::new();
    for (e, tau) in params.povm.effects().iter().zip(&params.states) {
        let ee = e.matrix().eigh()?;
        let te = tau.matrix().eigh()?;
        for (j, &mu) in ee.values.iter().enumerate() {
            if mu <= 1e-15 {
                continue;
            }
            let ej = ee.vector(j);
            for (i, &lambda) in te.values.iter().enumerate() {
                if lambda <= 1e-15 {
                    continue;
                }
                let phi = te.vector(i);
                let s = (lambda * mu).sqrt();
                kraus.push(CMatrix::from_fn(d_out, d_in, |r, c| phi[r] * ej[c].conj() * s));
            }
        }
    }
    Channel::new(d_in, d_out, kraus)
}

/// `sum_k (E_k^T / d_A) (x) (t_k tau_k)`: the (possibly sub-normalized) Choi operator.
pub fn choi_of_eb(params: &EbChannelParams) -> CMatrix {
    let (da, db) = (params.d_in(), params.d_out());
    let mut out = CMatrix::zeros(da * db, da * db);
    for (k, (e, tau)) in params.povm.effects().iter().zip(&params.states).enumerate() {
        let t = params.weight(k);
        if t == 0.0 {
            continue;
        }
        out += &e.matrix().transpose().kron(tau.matrix()).scale(t / da as f64);
    }
    out
}

/// Outcome of the partial-transpose test on a Choi state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbVerdict {
    Eb,
    NonEb,
    Inconclusive,
}

impl fmt::Display for EbVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EbVerdict::Eb => "EB",
            EbVerdict::NonEb => "NonEB",
            EbVerdict::Inconclusive => "Inconclusive",
        })
    }
}

/// PPT decides separability of the Choi state exactly when `d_A d_B <= 6`.
pub fn is_eb_by_ppt(ch: &Channel) -> EbVerdict {
    let choi = ch.choi_state();
    if choi.min_pt_eigenvalue() < -crate::qmat::TOL_PSD {
        EbVerdict::NonEb
    } else if ch.d_in() * ch.d_out() <= 6 {
        EbVerdict::Eb
    } else {
        EbVerdict::Inconclusive
    }
}

/// Haar-ish random channel: Kraus blocks of a random isometry `d_in -> n_kraus * d_out`.
///
/// `n_kraus` is raised to `ceil(d_in / d_out)` when needed so the isometry exists.
pub fn random_channel<R: rand::Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, n_kraus: usize) -> Channel {
    let n_kraus = n_kraus.max(d_in.div_ceil(d_out));
    let g = crate::qmat::random::gaussian_matrix(rng, n_kraus * d_out, d_in);
    let v = crate::qmat::random::isometry_from(&g);
    let kraus = (0..n_kraus)
        .map(|k| CMatrix::from_fn(d_out, d_in, |r, c| v[(k * d_out + r, c)]))
        .collect();
    Channel {
        d_in,
        d_out,
        kraus,
    }
}

/// Random measure-and-prepare parameters with `k` outcomes and pure outputs.
pub fn random_eb_params<R: rand::Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, k: usize) -> EbChannelParams {
    use crate::qmat::random::{random_mixed_state, random_povm, random_pure_state};
    let povm = random_povm(rng, d_in, k);
    let states = (0..k)
        .map(|j| if j % 2 == 0 { random_pure_state(rng, d_out) } else { random_mixed_state(rng, d_out) })
        .collect();
    EbChannelParams { povm, states, subnorm: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depol::{depolarizing, DepolParams};
    use crate::qmat::random::{self, random_mixed_state};
    use crate::qmat::{kron, named_qubit_state, Effect};
    use proptest::prelude::*;

    fn depol(gamma: f64, d: usize) -> Channel {
        depolarizing(DepolParams::new(gamma, d).unwrap())
    }

    fn dephasing_params() -> EbChannelParams {
        EbChannelParams::new(
            Povm::computational(2),
            vec![named_qubit_state("ket0").unwrap(), named_qubit_state("ket1").unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn apply_examples() {
        let mut rng = random::rng(1);
        let rho = random_mixed_state(&mut rng, 3);
        let out = Channel::identity(3).apply(&rho).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);

        let ket0 = named_qubit_state("ket0").unwrap();
        let out = depol(0.0, 2).apply(&ket0).unwrap();
        assert!(out.matrix().max_abs_diff(&CMatrix::identity(2).scale(0.5)) < 1e-12);
        let out = depol(0.5, 2).apply(&ket0).unwrap();
        assert!(out.matrix().max_abs_diff(&CMatrix::diag(&[0.75, 0.25])) < 1e-12);

        assert!(matches!(Channel::identity(2).apply(&rho), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn choi_examples() {
        let phi = max_entangled(2).unwrap();
        assert!(Channel::identity(2).choi_state().matrix().max_abs_diff(phi.matrix()) < 1e-15);
        let c0 = depol(0.0, 2).choi_state();
        assert!(c0.matrix().max_abs_diff(&CMatrix::identity(4).scale(0.25)) < 1e-12);
        for gamma in [0.25, 0.5, 1.0] {
            let want = phi.matrix().scale(gamma) + CMatrix::identity(4).scale((1.0 - gamma) / 4.0);
            // independent route: sum_mn |m><n| (x) N(|m><n|) / d
            let ch = depol(gamma, 2);
            let mut direct = CMatrix::zeros(4, 4);
            for m in 0..2 {
                for n in 0..2 {
                    let mut unit = CMatrix::zeros(2, 2);
                    unit[(m, n)] = crate::qmat::ONE;
                    direct += &unit.kron(&ch.apply_operator(&unit).unwrap()).scale(0.5);
                }
            }
            assert!(ch.choi_state().matrix().max_abs_diff(&want) < 1e-12);
            assert!(direct.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn eb_channel_examples() {
        let deph = eb_channel(&dephasing_params()).unwrap();
        let plus = named_qubit_state("plus").unwrap();
        let out = deph.apply(&plus).unwrap();
        assert!(out.matrix().max_abs_diff(&CMatrix::identity(2).scale(0.5)) < 1e-12);

        let mut rng = random::rng(5);
        let tau = random_mixed_state(&mut rng, 3);
        let half = Effect::new(CMatrix::identity(2).scale(0.5)).unwrap();
        let constant = eb_channel(&EbChannelParams::new(Povm::new(vec![half.clone(), half]).unwrap(), vec![tau.clone(), tau.clone()]).unwrap()).unwrap();
        let rho = random_mixed_state(&mut rng, 2);
        assert!(constant.apply(&rho).unwrap().matrix().max_abs_diff(tau.matrix()) < 1e-12);

        // z-basis measure and prepare: separable Choi, so PPT
        let choi = deph.choi_state();
        assert!(choi.min_pt_eigenvalue() > -1e-12);
        assert_eq!(is_eb_by_ppt(&deph), EbVerdict::Eb);
    }

    #[test]
    fn eb_channel_rejects_subnormalized() {
        let p = dephasing_params();
        let sub = EbChannelParams::with_subnorm(p.povm().clone(), p.states().to_vec(), Some(vec![1.0, 0.5])).unwrap();
        assert!(matches!(eb_channel(&sub), Err(Error::InvalidArgument(_))));
        assert!(EbChannelParams::with_subnorm(p.povm().clone(), p.states().to_vec(), Some(vec![1.0, 1.5])).is_err());
        assert!(EbChannelParams::new(p.povm().clone(), vec![p.states()[0].clone()]).is_err());
    }

    #[test]
    fn choi_of_eb_examples() {
        let mut rng = random::rng(8);
        let tau = random_mixed_state(&mut rng, 3);
        let single = EbChannelParams::new(Povm::new(vec![Effect::identity(2)]).unwrap(), vec![tau.clone()]).unwrap();
        let want = CMatrix::identity(2).scale(0.5).kron(tau.matrix());
        assert!(choi_of_eb(&single).max_abs_diff(&want) < 1e-15);

        let p0 = CMatrix::basis_projector(2, 0);
        let p1 = CMatrix::basis_projector(2, 1);
        let want = (kron(&p0, &p0) + kron(&p1, &p1)).scale(0.5);
        assert!(choi_of_eb(&dephasing_params()).max_abs_diff(&want) < 1e-15);

        let sub = EbChannelParams::with_subnorm(
            Povm::computational(2),
            vec![tau.clone(), tau],
            Some(vec![0.3, 1.0]),
        )
        .unwrap();
        let marg = choi_of_eb(&sub).partial_trace(Subsystem::B, 2, 3).unwrap();
        let gap = CMatrix::identity(2).scale(0.5) - marg;
        assert!(gap.min_eigenvalue().unwrap() > -1e-12);
    }

    #[test]
    fn ppt_examples() {
        assert_eq!(is_eb_by_ppt(&depol(0.30, 2)), EbVerdict::Eb);
        assert_eq!(is_eb_by_ppt(&depol(0.40, 2)), EbVerdict::NonEb);
        assert_eq!(is_eb_by_ppt(&Channel::identity(3)), EbVerdict::NonEb);
        // 3x3 PPT state cannot be decided by the partial transpose alone
        assert_eq!(is_eb_by_ppt(&depol(0.1, 3)), EbVerdict::Inconclusive);
    }

    #[test]
    fn ppt_flips_at_one_third() {
        assert_eq!(is_eb_by_ppt(&depol(1.0 / 3.0 - 1e-6, 2)), EbVerdict::Eb);
        assert_eq!(is_eb_by_ppt(&depol(1.0 / 3.0 + 1e-6, 2)), EbVerdict::NonEb);
    }

    #[test]
    fn channel_file_round_trip_and_errors() {
        let ch = depol(0.4, 2);
        let back = Channel::parse(&ch.to_text()).unwrap();
        assert_eq!(back.kraus(), ch.kraus());
        assert!(matches!(Channel::parse("chan 2 2 1"), Err(Error::Parse { .. })));
        assert!(matches!(Channel::parse("channel 2 2 1\ndims: 2 2\n1 0\n0 0.5"), Err(Error::InvalidChannel(_))));
        assert!(Channel::parse("channel 2 2 1\ndims: 2 2\n1 0\n0 1\n").is_ok());
    }

    #[test]
    fn choi_state_validates_marginal() {
        let bad = DensityMatrix::new(kron(&CMatrix::basis_projector(2, 0), &CMatrix::identity(2).scale(0.5))).unwrap();
        assert!(ChoiState::new(bad, 2, 2).is_err());
        let good = Channel::identity(2).choi_state();
        assert!(ChoiState::new(good.state().clone(), 2, 2).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn choi_marginal_holds_for_random_channels(seed in any::<u64>(), din in 2usize..4, dout in 2usize..4, n in 1usize..5) {
            let ch = random_channel(&mut random::rng(seed), din, dout, n);
            let choi = ch.choi_state();
            let marg = choi.matrix().partial_trace(Subsystem::B, din, dout).unwrap();
            prop_assert!(marg.max_abs_diff(&CMatrix::identity(din).scale(1.0 / din as f64)) < 1e-9);
            prop_assert!(ChoiState::new(choi.state().clone(), din, dout).is_ok());
        }

        #[test]
        fn eb_kraus_matches_choi_formula(seed in any::<u64>(), k in 2usize..5, dout in 2usize..4) {
            let mut rng = random::rng(seed);
            let p = random_eb_params(&mut rng, 2, dout, k);
            let ch = eb_channel(&p).unwrap();
            let diff = &ch.choi_state().matrix().clone() - &choi_of_eb(&p);
            prop_assert!(diff.frobenius_norm() < 1e-9);
            let rho = random_mixed_state(&mut rng, 2);
            let mut want = CMatrix::zeros(dout, dout);
            for (e, tau) in p.povm().effects().iter().zip(p.states()) {
                want.add_scaled(e.matrix().expect(rho.matrix()), tau.matrix());
            }
            prop_assert!(ch.apply(&rho).unwrap().matrix().max_abs_diff(&want) < 1e-9);
        }

        #[test]
        fn apply_preserves_trace_and_positivity(seed in any::<u64>(), din in 2usize..4, dout in 2usize..4) {
            let mut rng = random::rng(seed);
            let ch = random_channel(&mut rng, din, dout, 3);
            let rho = random_mixed_state(&mut rng, din);
            let out = ch.apply(&rho).unwrap();
            prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-9);
            prop_assert!(out.matrix().min_eigenvalue().unwrap() > -1e-9);
        }
    }
}
