//! Leader exosystem, follower LTI models and the regulator equations.

use crate::error::{invalid, Error, Result};
use crate::matops::{self, Matrix, Vector};

/// Autonomous leader `v̇ = S v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderModel {
    s: Matrix,
    v0: Vector,
}

impl LeaderModel {
    pub fn new(s: Matrix, v0: Vector) -> Result<Self> {
        if !matops::check_neutral_stability(&s)? {
            return Err(invalid(
                "leader matrix must be skew-symmetric (neutrally stable normal form)",
            ));
        }
        if v0.len() != s.nrows() {
            return Err(invalid(format!(
                "leader initial state has length {}, expected {}",
                v0.len(),
                s.nrows()
            )));
        }
        if v0.iter().any(|x| !x.is_finite()) {
            return Err(invalid("leader initial state is not finite"));
        }
        Ok(Self { s, v0 })
    }

    pub fn s(&self) -> &Matrix {
        &self.s
    }

    pub fn v0(&self) -> &Vector {
        &self.v0
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    /// `v(t) = exp(S t) v0`.
    pub fn flow(&self, t: f64) -> Result<Vector> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid(format!(
                "leader time must be non-negative, got {t}"
            )));
        }
        Ok(matops::expm_unchecked(&(&self.s * t)) * &self.v0)
    }
}

/// Follower `i`:
///
/// ```text
/// ẋ   = A x + B u + E v
/// e   = C x + D u + F v
/// y_m = C_m x + D_m u + F_m v
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub e: Matrix,
    pub f: Matrix,
    pub c_m: Matrix,
    pub d_m: Matrix,
    pub f_m: Matrix,
    pub x0: Vector,
}

fn expect_dims(m: &Matrix, rows: usize, cols: usize, name: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(invalid(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    matops::ensure_finite(m, name)
}

fn expect_len(v: &Vector, len: usize, name: &str) -> Result<()> {
    if v.len() != len {
        return Err(invalid(format!(
            "{name} has length {}, expected {len}",
            v.len()
        )));
    }
    Ok(())
}

impl FollowerModel {
    /// Checks that all nine matrices conform with each other and with a leader
    /// of dimension `nv`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Matrix,
        b: Matrix,
        c: Matrix,
        d: Matrix,
        e: Matrix,
        f: Matrix,
        c_m: Matrix,
        d_m: Matrix,
        f_m: Matrix,
        x0: Vector,
    ) -> Result<Self> {
        let n = a.nrows();
        let nu = b.ncols();
        let ne = c.nrows();
        let ny = c_m.nrows();
        let nv = e.ncols();
        if n == 0 || nu == 0 || ne == 0 || ny == 0 || nv == 0 {
            return Err(invalid("follower matrices must have non-zero dimensions"));
        }
        expect_dims(&a, n, n, "A")?;
        expect_dims(&b, n, nu, "B")?;
        expect_dims(&c, ne, n, "C")?;
        expect_dims(&d, ne, nu, "D")?;
        expect_dims(&e, n, nv, "E")?;
        expect_dims(&f, ne, nv, "F")?;
        expect_dims(&c_m, ny, n, "C_m")?;
        expect_dims(&d_m, ny, nu, "D_m")?;
        expect_dims(&f_m, ny, nv, "F_m")?;
        expect_len(&x0, n, "x0")?;
        Ok(Self {
            a,
            b,
            c,
            d,
            e,
            f,
            c_m,
            d_m,
            f_m,
            x0,
        })
    }

    pub fn n_state(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_input(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_error(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_output(&self) -> usize {
        self.c_m.nrows()
    }

    pub fn n_leader(&self) -> usize {
        self.e.ncols()
    }

    fn check_signals(&self, x: &Vector, u: &Vector, v: &Vector) -> Result<()> {
        expect_len(x, self.n_state(), "x")?;
        expect_len(u, self.n_input(), "u")?;
        expect_len(v, self.n_leader(), "v")
    }

    /// `A x + B u + E v`.
    pub fn derivative(&self, x: &Vector, u: &Vector, v: &Vector) -> Result<Vector> {
        self.check_signals(x, u, v)?;
        Ok(&self.a * x + &self.b * u + &self.e * v)
    }

    /// `C x + D u + F v`.
    pub fn regulation_error(&self, x: &Vector, u: &Vector, v: &Vector) -> Result<Vector> {
        self.check_signals(x, u, v)?;
        Ok(&self.c * x + &self.d * u + &self.f * v)
    }

    /// `C_m x + D_m u + F_m v`.
    pub fn measurement(&self, x: &Vector, u: &Vector, v: &Vector) -> Result<Vector> {
        self.check_signals(x, u, v)?;
        Ok(&self.c_m * x + &self.d_m * u + &self.f_m * v)
    }

    /// Length of the stacked regulator unknown `vec(col(X, U))`.
    pub fn regulator_len(&self) -> usize {
        (self.n_state() + self.n_input()) * self.n_leader()
    }
}

/// Solution `(X, U)` of `X S = A X + B U + E`, `0 = C X + D U + F`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSolution {
    pub x_sol: Matrix,
    pub u_sol: Matrix,
}

impl RegulatorSolution {
    /// Residual Frobenius norms of the two regulator equations.
    pub fn residuals(&self, m: &FollowerModel, s: &Matrix) -> (f64, f64) {
        let r1 = &self.x_sol * s - &m.a * &self.x_sol - &m.b * &self.u_sol - &m.e;
        let r2 = &m.c * &self.x_sol + &m.d * &self.u_sol + &m.f;
        (r1.norm(), r2.norm())
    }
}

/// Kronecker operator `Sᵀ ⊗ [[I,0],[0,0]] − I ⊗ [[A,B],[C,D]]`.
pub fn regulator_operator(m: &FollowerModel, s: &Matrix) -> Result<Matrix> {
    let nv = m.n_leader();
    if s.nrows() != nv || s.ncols() != nv {
        return Err(invalid(format!(
            "leader matrix is {}x{}, follower expects {nv}x{nv}",
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(regulator_operator_unchecked(m, s))
}

fn regulator_operator_unchecked(m: &FollowerModel, s: &Matrix) -> Matrix {
    let (n, nu, ne) = (m.n_state(), m.n_input(), m.n_error());
    let mut select = Matrix::zeros(n + ne, n + nu);
    select.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut block = Matrix::zeros(n + ne, n + nu);
    block.view_mut((0, 0), (n, n)).copy_from(&m.a);
    block.view_mut((0, n), (n, nu)).copy_from(&m.b);
    block.view_mut((n, 0), (ne, n)).copy_from(&m.c);
    block.view_mut((n, n), (ne, nu)).copy_from(&m.d);
    let ident = Matrix::identity(s.nrows(), s.nrows());
    matops::kron(&s.transpose(), &select) - matops::kron(&ident, &block)
}

/// `β = vec(col(E, F))`.
pub fn regulator_rhs(m: &FollowerModel) -> Vector {
    let (n, ne, nv) = (m.n_state(), m.n_error(), m.n_leader());
    let mut stacked = Matrix::zeros(n + ne, nv);
    stacked.view_mut((0, 0), (n, nv)).copy_from(&m.e);
    stacked.view_mut((n, 0), (ne, nv)).copy_from(&m.f);
    Vector::from_column_slice(stacked.as_slice())
}

/// Splits `χ = vec(col(X, U))` back into `(X, U)`.
pub fn unpack_regulator(chi: &Vector, m: &FollowerModel) -> Result<(Matrix, Matrix)> {
    let (n, nu, nv) = (m.n_state(), m.n_input(), m.n_leader());
    let stacked = matops::unvec(chi.as_slice(), n + nu, nv)?;
    Ok((
        stacked.rows(0, n).into_owned(),
        stacked.rows(n, nu).into_owned(),
    ))
}

/// Direct solve of the vectorized regulator equations.
pub fn solve_regulator_direct(m: &FollowerModel, s: &Matrix) -> Result<RegulatorSolution> {
    let op = regulator_operator(m, s)?;
    let beta = regulator_rhs(m);
    let svd = op.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (max, min) = (sv.max(), sv.min());
    // a tall operator needs full column rank; a wide one never has a unique solution
    if op.nrows() < op.ncols() || !(max > 0.0) || min <= 1e-12 * max {
        return Err(Error::NoSolution(
            "regulator operator is singular: the regulator equations have no unique solution"
                .into(),
        ));
    }
    let chi = svd
        .solve(&beta, 0.0)
        .map_err(|e| Error::NoSolution(e.to_string()))?;
    let (x_sol, u_sol) = unpack_regulator(&chi, m)?;
    let sol = RegulatorSolution { x_sol, u_sol };
    let (r1, r2) = sol.residuals(m, s);
    if r1 > 1e-9 || r2 > 1e-9 {
        return Err(Error::NoSolution(format!(
            "regulator equations are inconsistent (residuals {r1:e}, {r2:e})"
        )));
    }
    Ok(sol)
}

/// Gradient-flow derivative `−κ Âᵀ (Â χ̂ − β)` with `Â` built from `s_hat`.
pub fn adaptive_regulator_step(
    chi_hat: &Vector,
    s_hat: &Matrix,
    m: &FollowerModel,
    kappa: f64,
) -> Result<Vector> {
    if !(kappa > 0.0) {
        return Err(invalid("adaptive gain must be positive"));
    }
    if chi_hat.len() != m.regulator_len() {
        return Err(invalid(format!(
            "regulator estimate has length {}, expected {}",
            chi_hat.len(),
            m.regulator_len()
        )));
    }
    let op = regulator_operator(m, s_hat)?;
    let residual = &op * chi_hat - regulator_rhs(m);
    Ok(op.transpose() * residual * (-kappa))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn rotation() -> Matrix {
        Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
    }

    /// Double-integrator-like follower with damping `delta`, tracking `v₁`.
    pub(crate) fn follower(delta: f64) -> FollowerModel {
        FollowerModel::new(
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, delta]),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::zeros(1, 1),
            Matrix::zeros(2, 2),
            Matrix::from_row_slice(1, 2, &[-1.0, 0.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 2),
            Vector::from_vec(vec![0.2, 0.3]),
        )
        .unwrap()
    }

    fn vec2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    #[test]
    fn leader_flow_examples() {
        let still = LeaderModel::new(Matrix::zeros(2, 2), vec2(0.4, -1.0)).unwrap();
        assert_eq!(still.flow(7.5).unwrap(), vec2(0.4, -1.0));
        let l = LeaderModel::new(rotation(), vec2(0.9, -0.5)).unwrap();
        // closed form [[cos t, sin t], [-sin t, cos t]] v0
        let t = FRAC_PI_2;
        let oracle = vec2(
            t.cos() * 0.9 + t.sin() * -0.5,
            -t.sin() * 0.9 + t.cos() * -0.5,
        );
        assert!((l.flow(t).unwrap() - &oracle).norm() < 1e-14);
        assert!((oracle - vec2(-0.5, -0.9)).norm() < 1e-15);
        for &t in &[0.0, 1.3, 10.0, 29.99] {
            assert!((l.flow(t).unwrap().norm() - l.v0().norm()).abs() < 1e-12);
        }
        assert!(l.flow(-1.0).is_err());
    }

    #[test]
    fn leader_semigroup() {
        let l = LeaderModel::new(rotation() * 1.7, vec2(0.3, 0.8)).unwrap();
        for &(t, s) in &[(0.2, 0.9), (3.0, 4.5), (12.25, 0.01)] {
            let step = matops::mat_exp(&(l.s() * s)).unwrap() * l.flow(t).unwrap();
            assert!((l.flow(t + s).unwrap() - step).norm() < 1e-10);
        }
    }

    #[test]
    fn leader_rejects_non_skew() {
        let jordan = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(LeaderModel::new(jordan, vec2(1.0, 0.0)).is_err());
        assert!(LeaderModel::new(rotation(), Vector::zeros(3)).is_err());
    }

    #[test]
    fn follower_maps() {
        let m = follower(-0.3);
        let z2 = Vector::zeros(2);
        let z1 = Vector::zeros(1);
        assert_eq!(m.derivative(&z2, &z1, &z2).unwrap(), z2);
        assert_eq!(
            m.derivative(&vec2(0.0, 1.0), &z1, &z2).unwrap(),
            vec2(1.0, -0.3)
        );
        let (x1, u1, v1) = (vec2(0.3, -1.0), Vector::from_vec(vec![0.7]), vec2(0.1, 2.0));
        let (x2, u2, v2) = (
            vec2(-1.1, 0.4),
            Vector::from_vec(vec![-0.2]),
            vec2(0.5, 0.0),
        );
        let sum = m
            .derivative(&(&x1 + &x2), &(&u1 + &u2), &(&v1 + &v2))
            .unwrap();
        let parts = m.derivative(&x1, &u1, &v1).unwrap() + m.derivative(&x2, &u2, &v2).unwrap();
        assert!((sum - parts).norm() < 1e-15);

        assert_eq!(
            m.regulation_error(&vec2(1.0, 0.0), &z1, &vec2(1.0, 0.0))
                .unwrap()[0],
            0.0
        );
        let e = m
            .regulation_error(&vec2(0.2, 0.3), &z1, &vec2(0.9, -0.5))
            .unwrap();
        assert!((e[0] + 0.7).abs() < 1e-15);
        assert_eq!(m.measurement(&z2, &z1, &z2).unwrap(), z1);
        assert!(m.derivative(&Vector::zeros(3), &z1, &z2).is_err());
    }

    #[test]
    fn follower_dimension_mismatch() {
        let r = FollowerModel::new(
            Matrix::zeros(2, 2),
            Matrix::zeros(3, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 1),
            Matrix::zeros(2, 2),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 2),
            Vector::zeros(2),
        );
        assert!(r.is_err());
    }

    /// Hand-built 6x6 Kronecker system for the follower with damping delta,
    /// solved by Gauss-Jordan elimination. Unknowns: vec(col(X, U)) with X 2x2, U 1x2.
    #[allow(clippy::needless_range_loop)]
    fn regulator_oracle(delta: f64) -> [f64; 6] {
        // equations from X S = A X + B U + E and 0 = C X + F, S = [[0,1],[-1,0]], E = 0
        // unknown order (col-major of [X; U]): x00, x10, u0, x01, x11, u1
        // (XS)_{r,0} = -X_{r,1}, (XS)_{r,1} = X_{r,0}
        // row 0 of A X = X_{1,*};  row 1 of A X + B U = delta X_{1,*} + U
        let mut sys = [
            // -x01 - x10 = 0
            [0.0, -1.0, 0.0, -1.0, 0.0, 0.0, 0.0],
            // -x11 - delta x10 - u0 = 0
            [0.0, -delta, -1.0, 0.0, -1.0, 0.0, 0.0],
            // x00 - x11 = 0
            [1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
            // x10 - delta x11 - u1 = 0
            [0.0, 1.0, 0.0, 0.0, -delta, -1.0, 0.0],
            // x00 - 1 = 0
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            // x01 = 0
            [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        ];
        for col in 0..6 {
            let piv = (col..6)
                .max_by(|&a, &b| sys[a][col].abs().total_cmp(&sys[b][col].abs()))
                .unwrap();
            sys.swap(col, piv);
            let p = sys[col][col];
            for k in 0..7 {
                sys[col][k] /= p;
            }
            for r in 0..6 {
                if r != col {
                    let f = sys[r][col];
                    for k in 0..7 {
                        sys[r][k] -= f * sys[col][k];
                    }
                }
            }
        }
        let mut out = [0.0; 6];
        for (k, o) in out.iter_mut().enumerate() {
            *o = sys[k][6];
        }
        out
    }

    #[test]
    fn direct_regulator_matches_oracle() {
        for &delta in &[-0.3, -0.4, -0.5] {
            let oracle = regulator_oracle(delta);
            let sol = solve_regulator_direct(&follower(delta), &rotation()).unwrap();
            let got = [
                sol.x_sol[(0, 0)],
                sol.x_sol[(1, 0)],
                sol.u_sol[(0, 0)],
                sol.x_sol[(0, 1)],
                sol.x_sol[(1, 1)],
                sol.u_sol[(0, 1)],
            ];
            for k in 0..6 {
                assert!(
                    (got[k] - oracle[k]).abs() < 1e-12,
                    "delta {delta} entry {k}"
                );
            }
        }
        let sol = solve_regulator_direct(&follower(-0.3), &rotation()).unwrap();
        assert!((sol.x_sol.clone() - Matrix::identity(2, 2)).norm() < 1e-9);
        assert!((sol.u_sol[(0, 0)] + 1.0).abs() < 1e-9);
        assert!((sol.u_sol[(0, 1)] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn homogeneous_regulator() {
        let mut m = follower(-0.3);
        m.f = Matrix::zeros(1, 2);
        let sol = solve_regulator_direct(&m, &rotation()).unwrap();
        assert!(sol.x_sol.norm() < 1e-14 && sol.u_sol.norm() < 1e-14);
    }

    #[test]
    fn regulator_residual_on_constructed_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let s = rotation() * 0.8;
        for _ in 0..50 {
            let mut r = |rows, cols| Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
            let (a, b, c, d) = (r(3, 3), r(3, 1), r(1, 3), r(1, 1));
            let (x, u) = (r(3, 2), r(1, 2));
            // back out E, F so that (X, U) solves the equations
            let e = &x * &s - &a * &x - &b * &u;
            let f = -(&c * &x + &d * &u);
            let m = FollowerModel::new(
                a,
                b,
                c.clone(),
                d.clone(),
                e,
                f,
                c,
                d,
                Matrix::zeros(1, 2),
                Vector::zeros(3),
            )
            .unwrap();
            match solve_regulator_direct(&m, &s) {
                Ok(sol) => {
                    let (r1, r2) = sol.residuals(&m, &s);
                    assert!(r1 <= 1e-9 && r2 <= 1e-9);
                    assert!((sol.x_sol - x).norm() < 1e-7);
                }
                Err(Error::NoSolution(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn singular_regulator_operator() {
        // S has eigenvalue 0 and (A, B; C, D) = 0 makes the operator singular
        let m = FollowerModel::new(
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            Matrix::from_element(1, 1, 1.0),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            Vector::zeros(1),
        )
        .unwrap();
        assert!(matches!(
            solve_regulator_direct(&m, &Matrix::zeros(1, 1)),
            Err(Error::NoSolution(_))
        ));
    }

    #[test]
    fn adaptive_fixed_point_and_linearity() {
        let m = follower(-0.3);
        let sol = solve_regulator_direct(&m, &rotation()).unwrap();
        let mut stacked = Matrix::zeros(3, 2);
        stacked.view_mut((0, 0), (2, 2)).copy_from(&sol.x_sol);
        stacked.view_mut((2, 0), (1, 2)).copy_from(&sol.u_sol);
        let chi = Vector::from_column_slice(stacked.as_slice());
        let d = adaptive_regulator_step(&chi, &rotation(), &m, 30.0).unwrap();
        assert!(d.norm() < 1e-12);
        let (x, u) = unpack_regulator(&chi, &m).unwrap();
        assert_eq!((x, u), (sol.x_sol, sol.u_sol));

        let probe = Vector::from_vec(vec![0.1, -0.2, 0.3, 0.0, 0.5, 1.0]);
        let d1 = adaptive_regulator_step(&probe, &rotation(), &m, 1.5).unwrap();
        let d2 = adaptive_regulator_step(&probe, &rotation(), &m, 3.0).unwrap();
        assert!((d1 * 2.0 - d2).norm() < 1e-14);
        assert!(adaptive_regulator_step(&probe, &rotation(), &m, 0.0).is_err());
    }

    fn integrate_adaptive(
        m: &FollowerModel,
        s_hat: impl Fn(f64) -> Matrix,
        kappa: f64,
        t_end: f64,
        h: f64,
    ) -> Vector {
        let mut chi = Vector::zeros(m.regulator_len());
        let steps = (t_end / h).round() as usize;
        for k in 0..steps {
            let t = k as f64 * h;
            let f = |t: f64, c: &Vector| adaptive_regulator_step(c, &s_hat(t), m, kappa).unwrap();
            let k1 = f(t, &chi);
            let k2 = f(t + h / 2.0, &(&chi + &k1 * (h / 2.0)));
            let k3 = f(t + h / 2.0, &(&chi + &k2 * (h / 2.0)));
            let k4 = f(t + h, &(&chi + &k3 * h));
            chi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        chi
    }

    #[test]
    fn adaptive_converges_to_direct_solution() {
        let m = follower(-0.3);
        let sol = solve_regulator_direct(&m, &rotation()).unwrap();
        let chi = integrate_adaptive(&m, |_| rotation(), 30.0, 5.0, 0.002);
        let (x, u) = unpack_regulator(&chi, &m).unwrap();
        assert!((x - sol.x_sol).norm() < 1e-4);
        assert!((u - sol.u_sol).norm() < 1e-4);
    }

    #[test]
    fn adaptive_tracks_decaying_perturbation() {
        let m = follower(-0.4);
        let sol = solve_regulator_direct(&m, &rotation()).unwrap();
        let perturb = Matrix::from_row_slice(2, 2, &[0.5, -0.3, 0.8, 0.2]);
        let chi = integrate_adaptive(
            &m,
            |t| rotation() + &perturb * (-2.0 * t).exp(),
            30.0,
            8.0,
            0.002,
        );
        let (x, u) = unpack_regulator(&chi, &m).unwrap();
        assert!((x - sol.x_sol).norm() < 1e-4);
        assert!((u - sol.u_sol).norm() < 1e-4);
    }
}
