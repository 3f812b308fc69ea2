use super::expr::{AffineExpr, CExprMatrix, VariableLayout};
use super::{Cone, ConeBlock, ConicProgram, ProgramMetadata};
use crate::linalg::{identity, CMatrix, C64};
use crate::network::{NetworkConfig, UeId};
use crate::surrogate::{MinorantKind, QpMinorantSet, QpTerm, SdpMinorantSet, SdpTerm, SocMinorantSet, SocTerm};
use crate::throughput::PrecoderSet;

/// Problem data that is not part of the minorants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoweringParams {
    /// Per-BS power budget in the channel's units.
    pub power: f64,
    /// QoS threshold per UE, nats.
    pub qos_nats: f64,
}

impl LoweringParams {
    pub fn from_config(config: &NetworkConfig) -> Self {
        Self { power: config.power_budget_w(), qos_nats: config.qos_threshold_nats() }
    }
}

/// A minorant set of any family, for the feasibility lowering.
#[derive(Clone, Copy, Debug)]
pub enum MinorantSet<'a> {
    Qp(&'a QpMinorantSet),
    Sdp(&'a SdpMinorantSet),
    Soc(&'a SocMinorantSet),
}

impl MinorantSet<'_> {
    pub fn kind(&self) -> MinorantKind {
        match self {
            Self::Qp(_) => MinorantKind::Qp,
            Self::Sdp(_) => MinorantKind::Sdp,
            Self::Soc(_) => MinorantKind::Soc,
        }
    }
}

struct Builder {
    layout: VariableLayout,
    blocks: Vec<ConeBlock>,
    metadata: ProgramMetadata,
    /// Epigraph slack of every message, flat order.
    t: Vec<usize>,
    tau: Option<usize>,
    qos: f64,
    feasibility: bool,
}

fn magnitude(e: &AffineExpr) -> f64 {
    e.terms.iter().fold(e.constant.abs(), |m, &(_, c)| m.max(c.abs()))
}

fn rotated(u: AffineExpr, w: AffineExpr, z: Vec<AffineExpr>) -> Vec<AffineExpr> {
    // 2uw ≥ ‖z‖², u, w ≥ 0  ⇔  ‖(u − w, √2 z)‖ ≤ u + w. Rescaling u by 1/s
    // and w by s keeps the cone and evens out the row magnitudes.
    let (mu, mw) = (magnitude(&u), magnitude(&w));
    let s = if mu > 0.0 && mw > 0.0 { (mu / mw).sqrt() } else { 1.0 };
    let (u, w) = (u.scaled(1.0 / s), w.scaled(s));
    let mut rows = vec![u.clone().plus(&w, 1.0), u.plus(&w, -1.0)];
    rows.extend(z.into_iter().map(|e| e.scaled(std::f64::consts::SQRT_2)));
    rows
}

impl Builder {
    fn new(
        anchor: &PrecoderSet,
        kind: MinorantKind,
        feasibility: bool,
        params: LoweringParams,
        terms_per_message: &[usize],
    ) -> Self {
        let u = anchor.users_per_cell();
        let mut layout = VariableLayout::new(anchor.n_cells(), u, anchor.tx_antennas(), anchor.streams());
        let t = (0..terms_per_message.len())
            .map(|k| {
                let ue = UeId::from_flat(k, u);
                layout.add_slack(format!("t{ue}"))
            })
            .collect();
        let tau = feasibility.then(|| layout.add_slack("tau"));
        let metadata = ProgramMetadata {
            kind,
            feasibility,
            n_complex: anchor.n_cells() * u * anchor.tx_antennas() * anchor.streams(),
            n_min_slacks: terms_per_message.iter().filter(|&&k| k > 1).count(),
            n_real_variables: 0,
            m_power: 0,
            m_rate: 0,
            m_trust: 0,
        };
        let mut b = Self { layout, blocks: Vec::new(), metadata, t, tau, qos: params.qos_nats, feasibility };
        b.power_rows(params.power);
        b.qos_link(kind);
        b
    }

    fn power_rows(&mut self, power: f64) {
        for cell in 0..self.layout.n_cells {
            let mut rows = vec![AffineExpr::constant(power.sqrt())];
            rows.extend(self.layout.cell_coordinates(cell).map(AffineExpr::var));
            self.blocks.push(ConeBlock::new(Cone::SecondOrder, format!("power[{}]", cell + 1), rows));
            self.metadata.m_power += 1;
        }
    }

    /// `t_m ≥ r` (or `t_m ≥ τ·r` when maximizing the QoS ratio).
    fn qos_link(&mut self, kind: MinorantKind) {
        if kind == MinorantKind::Soc && !self.feasibility {
            return;
        }
        let rows = self
            .t
            .iter()
            .map(|&t| match self.tau {
                Some(tau) => AffineExpr::var(t).plus(&AffineExpr::var(tau), -self.qos),
                None => AffineExpr::var(t).plus(&AffineExpr::constant(self.qos), -1.0),
            })
            .collect();
        self.blocks.push(ConeBlock::new(Cone::Nonneg, "qos", rows));
    }

    fn t_of(&self, ue: UeId) -> usize {
        self.t[ue.flat(self.layout.users_per_cell)]
    }

    fn flat(&self, ue: UeId) -> usize {
        ue.flat(self.layout.users_per_cell)
    }

    fn finish(mut self) -> ConicProgram {
        let objective = match self.tau {
            Some(tau) => AffineExpr::var(tau),
            None => {
                let mut e = AffineExpr::default();
                for &t in &self.t {
                    e.push(t, 1.0);
                }
                e
            }
        };
        self.metadata.n_real_variables = self.layout.len();
        ConicProgram { layout: self.layout, objective, blocks: self.blocks, metadata: self.metadata }
    }

    fn qp_term(&mut self, term: &QpTerm) {
        let m = self.flat(term.id.message);
        let mut lin = AffineExpr::constant(term.constant);
        let a = &term.a_matrix;
        for c in 0..self.layout.streams {
            for r in 0..self.layout.tx_antennas {
                lin.push(self.layout.re(m, r, c), 2.0 * a[(r, c)].re);
                lin.push(self.layout.im(m, r, c), 2.0 * a[(r, c)].im);
            }
        }
        let u = lin.plus(&AffineExpr::var(self.t_of(term.id.message)), -1.0);
        let z = term
            .quad_ues
            .iter()
            .flat_map(|f| {
                CExprMatrix::product(&self.layout, self.flat(*f), &term.weighted_links[f.cell], None)
                    .realified_entries()
            })
            .collect();
        let label = format!("qp{}@{}", term.id.message, term.decoder);
        self.blocks.push(ConeBlock::new(Cone::SecondOrder, label, rotated(u, AffineExpr::constant(0.5), z)));
        self.metadata.m_rate += 1;
    }

    fn hermitian_affine(&self, h: &crate::surrogate::HermitianAffine) -> CExprMatrix {
        let mut out = CExprMatrix::from_constant(&h.constant);
        for t in &h.terms {
            out.add(&CExprMatrix::product(&self.layout, self.flat(t.ue), &t.left, Some(&t.right)).plus_adjoint());
        }
        out
    }

    fn sdp_term(&mut self, term: &SdpTerm, anchor: &PrecoderSet) {
        let l = self.layout.streams;
        let tag = format!("{}@{}", term.id.message, term.decoder);
        // Hermitian epigraph matrix U.
        let mut u = CExprMatrix::zeros(l, l);
        let mut trace_u = AffineExpr::default();
        for c in 0..l {
            for r in 0..=c {
                if r == c {
                    let k = self.layout.add_slack(format!("U{tag}({r},{c})"));
                    u.at_mut(r, c).re = AffineExpr::var(k);
                    trace_u.push(k, 1.0);
                } else {
                    let kr = self.layout.add_slack(format!("U{tag}({r},{c}).re"));
                    let ki = self.layout.add_slack(format!("U{tag}({r},{c}).im"));
                    u.at_mut(r, c).re = AffineExpr::var(kr);
                    u.at_mut(r, c).im = AffineExpr::var(ki);
                }
            }
        }
        // Congruence with diag(I, αI, I): the middle block is near C at the
        // anchor, so α = 1/√‖C‖ brings every entry to order one.
        let alpha = 1.0 / term.c_matrix.norm().max(1.0).sqrt();
        let mut iq = self.hermitian_affine(&term.q_affine);
        iq.add(&CExprMatrix::from_constant(&identity(l)));
        let iq = iq.scaled(alpha * alpha);
        let k = term.q_quadratic.len();
        let mut sizes = vec![l, l];
        let mut blocks: Vec<Vec<Option<CExprMatrix>>> = vec![
            vec![Some(u), Some(CExprMatrix::from_constant(&(&term.c_sqrt * C64::new(alpha, 0.0))))],
            vec![None, Some(iq)],
        ];
        if k > 0 {
            let mut w = CExprMatrix::zeros(l, k * l);
            for (s, (f, wf)) in term.q_quadratic.iter().enumerate() {
                let p = CExprMatrix::product(&self.layout, self.flat(*f), wf, None);
                for c in 0..l {
                    for r in 0..l {
                        *w.at_mut(r, s * l + c) = p.at(r, c).clone();
                    }
                }
            }
            sizes.push(k * l);
            blocks[0].push(None);
            blocks[1].push(Some(w.scaled(alpha)));
            blocks.push(vec![None, None, Some(CExprMatrix::from_constant(&identity(k * l)))]);
        }
        let lmi = CExprMatrix::hermitian_blocks(&sizes, &blocks);
        let dim = 2 * lmi.rows;
        self.blocks.push(ConeBlock::new(Cone::Psd { dim }, format!("sdp{tag}"), lmi.realified_upper_triangle()));
        self.metadata.m_rate += 1;

        // t_m ≤ R(V̄) + L − tr U.
        let row = AffineExpr::constant(term.anchor_rate + l as f64)
            .plus(&trace_u, -1.0)
            .plus(&AffineExpr::var(self.t_of(term.id.message)), -1.0);
        self.blocks.push(ConeBlock::new(Cone::Nonneg, format!("epi{tag}"), vec![row]));

        if let Some(tr) = &term.trust {
            // Positive rescaling by the anchor's ℒ = Σ H V̄V̄ᴴHᴴ.
            let scale = tr.eval(anchor).norm();
            let scale = if scale > 0.0 { 1.0 / scale } else { 1.0 };
            let lmat = self.hermitian_affine(tr).scaled(scale);
            let lmat = CExprMatrix::hermitian_blocks(&[lmat.rows], &[vec![Some(lmat)]]);
            let dim = 2 * lmat.rows;
            self.blocks.push(ConeBlock::new(Cone::Psd { dim }, format!("trust{tag}"), lmat.realified_upper_triangle()));
        }
        // Vacuous trust regions (nothing left to interfere) still count as rows.
        self.metadata.m_trust += term.rx_antennas;
    }

    fn soc_term(&mut self, term: &SocTerm) {
        let m = self.flat(term.id.message);
        let tag = format!("{}@{}", term.id.message, term.decoder);
        let row = term.signal_row.clone();
        let g = term.anchor_signal;
        let weighted: CMatrix = &row * g.conj();
        let z = CExprMatrix::product(&self.layout, m, &weighted, None);
        let phi = z.at(0, 0).re.clone().scaled(2.0).plus(&AffineExpr::constant(g.norm_sqr()), -1.0);
        let sigma = term.noise_power.sqrt();
        let interference: Vec<AffineExpr> = term
            .interferers
            .iter()
            .flat_map(|(f, h)| CExprMatrix::product(&self.layout, self.flat(*f), h, None).realified_entries())
            .collect();
        let scaled = |c: f64| -> Vec<AffineExpr> {
            std::iter::once(AffineExpr::constant(c * sigma))
                .chain(interference.iter().map(|e| e.clone().scaled(c)))
                .collect()
        };

        // b·ℳ(V) ≤ (a − t)·φ(V).
        let u = AffineExpr::constant(term.a).plus(&AffineExpr::var(self.t_of(term.id.message)), -1.0);
        let rows = rotated(u, phi.clone().scaled(0.5), scaled(term.b.sqrt()));
        self.blocks.push(ConeBlock::new(Cone::SecondOrder, format!("soc{tag}"), rows));
        self.blocks.push(ConeBlock::new(Cone::Nonneg, format!("trust{tag}"), vec![phi.clone()]));
        self.metadata.m_rate += 1;

        if self.feasibility {
            return;
        }
        let c = self.qos.exp_m1().max(0.0).sqrt();
        if term.decoder == term.id.message {
            // Re{h V_m} ≥ √(e^r − 1)·‖(σ, h_f V_f)‖.
            let own = CExprMatrix::product(&self.layout, m, &row, None);
            let mut rows = vec![own.at(0, 0).re.clone()];
            rows.extend(scaled(c));
            self.blocks.push(ConeBlock::new(Cone::SecondOrder, format!("rate{tag}"), rows));
        } else {
            // φ(V) ≥ (e^r − 1)·ℳ(V).
            let rows = rotated(phi.scaled(0.5), AffineExpr::constant(1.0), scaled(c));
            self.blocks.push(ConeBlock::new(Cone::SecondOrder, format!("rate{tag}"), rows));
        }
        self.metadata.m_rate += 1;
    }
}

fn terms_per_message<T>(terms: &[Vec<T>]) -> Vec<usize> {
    terms.iter().map(Vec::len).collect()
}

fn qp(set: &QpMinorantSet, params: LoweringParams, feasibility: bool) -> ConicProgram {
    let mut b = Builder::new(&set.anchor, MinorantKind::Qp, feasibility, params, &terms_per_message(&set.terms));
    for t in set.terms.iter().flatten() {
        b.qp_term(t);
    }
    b.finish()
}

fn sdp(set: &SdpMinorantSet, params: LoweringParams, feasibility: bool) -> ConicProgram {
    let mut b = Builder::new(&set.anchor, MinorantKind::Sdp, feasibility, params, &terms_per_message(&set.terms));
    for t in set.terms.iter().flatten() {
        b.sdp_term(t, &set.anchor);
    }
    b.finish()
}

fn soc(set: &SocMinorantSet, params: LoweringParams, feasibility: bool) -> ConicProgram {
    let mut b = Builder::new(&set.anchor, MinorantKind::Soc, feasibility, params, &terms_per_message(&set.terms));
    for t in set.terms.iter().flatten() {
        b.soc_term(t);
    }
    b.finish()
}

/// Maximize the sum of quadratic message minorants under QoS and power.
pub fn lower_qp_subproblem(set: &QpMinorantSet, params: LoweringParams) -> ConicProgram {
    qp(set, params, false)
}

/// Maximize the sum of matrix-fractional minorants; each term is one
/// Schur-complement LMI plus its trust region.
pub fn lower_sdp_subproblem(set: &SdpMinorantSet, params: LoweringParams) -> ConicProgram {
    sdp(set, params, false)
}

/// Maximize the sum of fractional MISO minorants with second-order QoS rows.
pub fn lower_soc_subproblem(set: &SocMinorantSet, params: LoweringParams) -> ConicProgram {
    soc(set, params, false)
}

/// Maximize `τ` subject to every message minorant `≥ τ·r`.
pub fn lower_feasibility_subproblem(set: MinorantSet<'_>, params: LoweringParams) -> ConicProgram {
    match set {
        MinorantSet::Qp(s) => qp(s, params, true),
        MinorantSet::Sdp(s) => sdp(s, params, true),
        MinorantSet::Soc(s) => soc(s, params, true),
    }
}
