//! Rational B-spline curves and surfaces.
//!
//! Evaluation uses the Cox-de Boor recursion for the non-vanishing basis
//! functions and their first derivatives; rational derivatives follow from the
//! quotient rule on the homogeneous sums. Knot insertion (Boehm) and degree
//! elevation operate on homogeneous control points, so they preserve the shape
//! of rational curves exactly.

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use super::{Interval, Vec3, GEOM_EPS};
use crate::error::{Error, Result};

type Hom = Vector4<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BSplineCurve {
    pub degree: usize,
    pub knots: Vec<f64>,
    pub controls: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// Tensor-product surface. Control net is stored u-major: `controls[i * count_v + j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BSplineSurface {
    pub degree_u: usize,
    pub degree_v: usize,
    pub knots_u: Vec<f64>,
    pub knots_v: Vec<f64>,
    pub count_u: usize,
    pub count_v: usize,
    pub controls: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

fn check_knots(degree: usize, knots: &[f64], count: usize) -> Result<()> {
    if degree == 0 {
        return Err(Error::InvalidGeometry("degree must be at least 1".into()));
    }
    if count < degree + 1 {
        return Err(Error::InvalidGeometry(format!(
            "{count} control points cannot carry degree {degree}"
        )));
    }
    if knots.len() != count + degree + 1 {
        return Err(Error::InvalidGeometry(format!(
            "expected {} knots for {count} controls of degree {degree}, found {}",
            count + degree + 1,
            knots.len()
        )));
    }
    if knots.iter().any(|k| !k.is_finite()) {
        return Err(Error::InvalidGeometry("non-finite knot".into()));
    }
    if knots.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGeometry("knot vector decreases".into()));
    }
    if knots[count] <= knots[degree] {
        return Err(Error::InvalidGeometry("empty knot domain".into()));
    }
    Ok(())
}

fn check_weights(weights: Option<&[f64]>, count: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != count {
            return Err(Error::InvalidGeometry(format!(
                "{} weights for {count} control points",
                w.len()
            )));
        }
        if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidGeometry("weights must be positive".into()));
        }
    }
    Ok(())
}

/// Index `k` of the knot span with `knots[k] <= u < knots[k + 1]`, clamped to the
/// last non-empty span at the right end of the domain.
pub fn find_span(degree: usize, knots: &[f64], count: usize, u: f64) -> usize {
    let n = count - 1;
    if u >= knots[n + 1] {
        // last span with positive length
        let mut k = n;
        while k > degree && knots[k] >= knots[k + 1] {
            k -= 1;
        }
        return k;
    }
    if u <= knots[degree] {
        let mut k = degree;
        while k < n && knots[k + 1] <= u {
            k += 1;
        }
        return k;
    }
    let (mut lo, mut hi) = (degree, n + 1);
    let mut mid = (lo + hi) / 2;
    while u < knots[mid] || u >= knots[mid + 1] {
        if u < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
        mid = (lo + hi) / 2;
    }
    mid
}

/// Values and first derivatives of the `degree + 1` basis functions that are
/// non-zero on `span`.
pub fn basis_with_derivative(
    span: usize,
    u: f64,
    degree: usize,
    knots: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let p = degree;
    // ndu[j][r]: basis values (upper triangle) and knot differences (lower).
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let values: Vec<f64> = (0..=p).map(|j| ndu[j][p]).collect();
    // First derivative: N'_{i,p} = p (N_{i,p-1}/(u_{i+p}-u_i) - N_{i+1,p-1}/(u_{i+p+1}-u_{i+1}))
    let mut derivs = vec![0.0; p + 1];
    for (r, d) in derivs.iter_mut().enumerate() {
        let mut acc = 0.0;
        if r >= 1 {
            let denom = ndu[p][r - 1];
            acc += ndu[r - 1][p - 1] / denom;
        }
        if r < p {
            let denom = ndu[p][r];
            acc -= ndu[r][p - 1] / denom;
        }
        *d = p as f64 * acc;
    }
    (values, derivs)
}

fn to_hom(p: &Vec3, w: f64) -> Hom {
    Hom::new(p.x * w, p.y * w, p.z * w, w)
}

fn from_hom(h: &Hom) -> (Vec3, f64) {
    (Vec3::new(h.x / h.w, h.y / h.w, h.z / h.w), h.w)
}

fn multiplicity(knots: &[f64], t: f64) -> usize {
    knots.iter().filter(|&&k| (k - t).abs() <= GEOM_EPS).count()
}

/// Boehm insertion of a single knot into a homogeneous control polygon.
fn insert_knot_hom(degree: usize, knots: &[f64], pts: &[Hom], t: f64) -> Result<(Vec<f64>, Vec<Hom>)> {
    let p = degree;
    let lo = knots[p];
    let hi = knots[pts.len()];
    if !(t > lo && t < hi) {
        return Err(Error::Domain { value: t, lo, hi });
    }
    let s = multiplicity(knots, t);
    if s >= p {
        return Err(Error::InvalidGeometry(format!(
            "knot {t} already has multiplicity {s} = degree {p}"
        )));
    }
    let k = find_span(p, knots, pts.len(), t);
    let n = pts.len() - 1;
    let mut out = Vec::with_capacity(pts.len() + 1);
    for i in 0..=n + 1 {
        let q = if i + p <= k {
            pts[i]
        } else if i > k {
            pts[i - 1]
        } else {
            let alpha = (t - knots[i]) / (knots[i + p] - knots[i]);
            pts[i] * alpha + pts[i - 1] * (1.0 - alpha)
        };
        out.push(q);
    }
    let mut new_knots = Vec::with_capacity(knots.len() + 1);
    new_knots.extend_from_slice(&knots[..=k]);
    new_knots.push(t);
    new_knots.extend_from_slice(&knots[k + 1..]);
    Ok((new_knots, out))
}

fn is_clamped(degree: usize, knots: &[f64]) -> bool {
    let n = knots.len();
    knots[..=degree].iter().all(|&k| k == knots[0]) && knots[n - degree - 1..].iter().all(|&k| k == knots[n - 1])
}

/// Raises the degree by one via Bézier decomposition. Interior knots end up with
/// multiplicity equal to the new degree, which keeps the shape exact.
fn elevate_degree_hom(degree: usize, knots: &[f64], pts: &[Hom]) -> Result<(Vec<f64>, Vec<Hom>)> {
    let p = degree;
    if !is_clamped(p, knots) {
        return Err(Error::InvalidGeometry(
            "degree elevation requires a clamped knot vector".into(),
        ));
    }
    let (a, b) = (knots[p], knots[pts.len()]);
    let mut interior: Vec<f64> = Vec::new();
    for &k in &knots[p + 1..pts.len()] {
        if k > a && k < b && interior.last().is_none_or(|&l| (k - l).abs() > GEOM_EPS) {
            interior.push(k);
        }
    }
    let mut kv = knots.to_vec();
    let mut cp = pts.to_vec();
    for &t in &interior {
        while multiplicity(&kv, t) < p {
            let (nk, np) = insert_knot_hom(p, &kv, &cp, t)?;
            kv = nk;
            cp = np;
        }
    }
    let segments = interior.len() + 1;
    debug_assert_eq!(cp.len(), segments * p + 1);
    let q = p + 1;
    let mut out = Vec::with_capacity(segments * q + 1);
    for s in 0..segments {
        let seg = &cp[s * p..=s * p + p];
        let start = if s == 0 { 0 } else { 1 };
        for i in start..=q {
            let r = if i == 0 {
                seg[0]
            } else if i == q {
                seg[p]
            } else {
                let c = i as f64 / q as f64;
                seg[i - 1] * c + seg[i] * (1.0 - c)
            };
            out.push(r);
        }
    }
    let mut new_knots = vec![a; q + 1];
    for &t in &interior {
        new_knots.extend(std::iter::repeat_n(t, q));
    }
    new_knots.extend(std::iter::repeat_n(b, q + 1));
    Ok((new_knots, out))
}

impl BSplineCurve {
    pub fn new(degree: usize, knots: Vec<f64>, controls: Vec<Vec3>, weights: Option<Vec<f64>>) -> Result<Self> {
        let c = Self { degree, knots, controls, weights };
        c.validate()?;
        Ok(c)
    }

    /// Clamped curve with uniformly spaced interior knots on `[0, 1]`.
    pub fn clamped_uniform(degree: usize, controls: Vec<Vec3>) -> Result<Self> {
        let n = controls.len();
        if n < degree + 1 {
            return Err(Error::InvalidGeometry("too few control points".into()));
        }
        let spans = n - degree;
        let mut knots = vec![0.0; degree + 1];
        for i in 1..spans {
            knots.push(i as f64 / spans as f64);
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::new(degree, knots, controls, None)
    }

    pub fn validate(&self) -> Result<()> {
        check_knots(self.degree, &self.knots, self.controls.len())?;
        check_weights(self.weights.as_deref(), self.controls.len())?;
        if self.controls.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidGeometry("non-finite control point".into()));
        }
        Ok(())
    }

    pub fn domain(&self) -> Interval {
        Interval::new_unchecked(self.knots[self.degree], self.knots[self.controls.len()])
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    fn homogeneous(&self) -> Vec<Hom> {
        self.controls.iter().enumerate().map(|(i, p)| to_hom(p, self.weight(i))).collect()
    }

    fn from_homogeneous(degree: usize, knots: Vec<f64>, pts: &[Hom], rational: bool) -> Self {
        let mut controls = Vec::with_capacity(pts.len());
        let mut weights = Vec::with_capacity(pts.len());
        for h in pts {
            let (p, w) = from_hom(h);
            controls.push(p);
            weights.push(w);
        }
        Self { degree, knots, controls, weights: rational.then_some(weights) }
    }

    /// Point and first derivative at `u`; `u` must lie in the knot domain.
    pub fn eval(&self, u: f64) -> Result<(Vec3, Vec3)> {
        let u = self.domain().check(u)?;
        let p = self.degree;
        let span = find_span(p, &self.knots, self.controls.len(), u);
        let (n, dn) = basis_with_derivative(span, u, p, &self.knots);
        let mut a = Vec3::zeros();
        let mut da = Vec3::zeros();
        let mut w = 0.0;
        let mut dw = 0.0;
        for i in 0..=p {
            let idx = span - p + i;
            let wi = self.weight(idx);
            let pt = self.controls[idx];
            a += pt * (n[i] * wi);
            da += pt * (dn[i] * wi);
            w += n[i] * wi;
            dw += dn[i] * wi;
        }
        let point = a / w;
        let deriv = (da - point * dw) / w;
        Ok((point, deriv))
    }

    pub fn insert_knot(&self, t: f64) -> Result<Self> {
        let (knots, pts) = insert_knot_hom(self.degree, &self.knots, &self.homogeneous(), t)?;
        Ok(Self::from_homogeneous(self.degree, knots, &pts, self.weights.is_some()))
    }

    pub fn elevate_degree(&self) -> Result<Self> {
        let (knots, pts) = elevate_degree_hom(self.degree, &self.knots, &self.homogeneous())?;
        Ok(Self::from_homogeneous(self.degree + 1, knots, &pts, self.weights.is_some()))
    }

    pub fn map_points(&mut self, f: impl Fn(&Vec3) -> Vec3) {
        for p in &mut self.controls {
            *p = f(p);
        }
    }
}

/// Parameter direction of a tensor-product surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    U,
    V,
}

impl BSplineSurface {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        degree_u: usize,
        degree_v: usize,
        knots_u: Vec<f64>,
        knots_v: Vec<f64>,
        count_u: usize,
        count_v: usize,
        controls: Vec<Vec3>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let s = Self { degree_u, degree_v, knots_u, knots_v, count_u, count_v, controls, weights };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.controls.len() != self.count_u * self.count_v {
            return Err(Error::InvalidGeometry(format!(
                "control net has {} points, expected {}x{}",
                self.controls.len(),
                self.count_u,
                self.count_v
            )));
        }
        check_knots(self.degree_u, &self.knots_u, self.count_u)?;
        check_knots(self.degree_v, &self.knots_v, self.count_v)?;
        check_weights(self.weights.as_deref(), self.controls.len())?;
        if self.controls.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidGeometry("non-finite control point".into()));
        }
        Ok(())
    }

    pub fn domain_u(&self) -> Interval {
        Interval::new_unchecked(self.knots_u[self.degree_u], self.knots_u[self.count_u])
    }

    pub fn domain_v(&self) -> Interval {
        Interval::new_unchecked(self.knots_v[self.degree_v], self.knots_v[self.count_v])
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Point and both first partials.
    pub fn eval(&self, u: f64, v: f64) -> Result<(Vec3, Vec3, Vec3)> {
        let u = self.domain_u().check(u)?;
        let v = self.domain_v().check(v)?;
        let (pu, pv) = (self.degree_u, self.degree_v);
        let su = find_span(pu, &self.knots_u, self.count_u, u);
        let sv = find_span(pv, &self.knots_v, self.count_v, v);
        let (nu, dnu) = basis_with_derivative(su, u, pu, &self.knots_u);
        let (nv, dnv) = basis_with_derivative(sv, v, pv, &self.knots_v);
        let (mut a, mut au, mut av) = (Vec3::zeros(), Vec3::zeros(), Vec3::zeros());
        let (mut w, mut wu, mut wv) = (0.0, 0.0, 0.0);
        for i in 0..=pu {
            let iu = su - pu + i;
            for j in 0..=pv {
                let jv = sv - pv + j;
                let idx = iu * self.count_v + jv;
                let wi = self.weight(idx);
                let pt = self.controls[idx];
                let b = nu[i] * nv[j] * wi;
                let bu = dnu[i] * nv[j] * wi;
                let bv = nu[i] * dnv[j] * wi;
                a += pt * b;
                au += pt * bu;
                av += pt * bv;
                w += b;
                wu += bu;
                wv += bv;
            }
        }
        let s = a / w;
        Ok((s, (au - s * wu) / w, (av - s * wv) / w))
    }

    fn lines(&self, dir: Direction) -> Vec<Vec<Hom>> {
        let (nu, nv) = (self.count_u, self.count_v);
        let at = |i: usize, j: usize| {
            let idx = i * nv + j;
            to_hom(&self.controls[idx], self.weight(idx))
        };
        match dir {
            Direction::U => (0..nv).map(|j| (0..nu).map(|i| at(i, j)).collect()).collect(),
            Direction::V => (0..nu).map(|i| (0..nv).map(|j| at(i, j)).collect()).collect(),
        }
    }

    fn rebuild(&self, dir: Direction, degree: usize, knots: Vec<f64>, lines: Vec<Vec<Hom>>) -> Self {
        let len = lines[0].len();
        let (count_u, count_v) = match dir {
            Direction::U => (len, self.count_v),
            Direction::V => (self.count_u, len),
        };
        let mut controls = vec![Vec3::zeros(); count_u * count_v];
        let mut weights = vec![1.0; count_u * count_v];
        for (l, line) in lines.iter().enumerate() {
            for (k, h) in line.iter().enumerate() {
                let (i, j) = match dir {
                    Direction::U => (k, l),
                    Direction::V => (l, k),
                };
                let (p, w) = from_hom(h);
                controls[i * count_v + j] = p;
                weights[i * count_v + j] = w;
            }
        }
        let mut out = self.clone();
        out.count_u = count_u;
        out.count_v = count_v;
        out.controls = controls;
        out.weights = self.weights.is_some().then_some(weights);
        match dir {
            Direction::U => {
                out.degree_u = degree;
                out.knots_u = knots;
            }
            Direction::V => {
                out.degree_v = degree;
                out.knots_v = knots;
            }
        }
        out
    }

    fn dir_params(&self, dir: Direction) -> (usize, &[f64]) {
        match dir {
            Direction::U => (self.degree_u, &self.knots_u),
            Direction::V => (self.degree_v, &self.knots_v),
        }
    }

    pub fn insert_knot(&self, dir: Direction, t: f64) -> Result<Self> {
        let (p, knots) = self.dir_params(dir);
        let mut new_knots = Vec::new();
        let mut lines = Vec::new();
        for line in self.lines(dir) {
            let (k, pts) = insert_knot_hom(p, knots, &line, t)?;
            new_knots = k;
            lines.push(pts);
        }
        Ok(self.rebuild(dir, p, new_knots, lines))
    }

    pub fn elevate_degree(&self, dir: Direction) -> Result<Self> {
        let (p, knots) = self.dir_params(dir);
        let mut new_knots = Vec::new();
        let mut lines = Vec::new();
        for line in self.lines(dir) {
            let (k, pts) = elevate_degree_hom(p, knots, &line)?;
            new_knots = k;
            lines.push(pts);
        }
        Ok(self.rebuild(dir, p + 1, new_knots, lines))
    }

    pub fn map_points(&mut self, f: impl Fn(&Vec3) -> Vec3) {
        for p in &mut self.controls {
            *p = f(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Polynomial in `u` stored by ascending power.
    #[derive(Clone, Debug)]
    struct Poly(Vec<f64>);

    impl Poly {
        fn zero() -> Self {
            Poly(vec![0.0])
        }
        fn add(&self, o: &Poly) -> Poly {
            let n = self.0.len().max(o.0.len());
            Poly((0..n).map(|i| self.0.get(i).unwrap_or(&0.0) + o.0.get(i).unwrap_or(&0.0)).collect())
        }
        /// self * (a + b u)
        fn mul_linear(&self, a: f64, b: f64) -> Poly {
            let mut out = vec![0.0; self.0.len() + 1];
            for (i, c) in self.0.iter().enumerate() {
                out[i] += a * c;
                out[i + 1] += b * c;
            }
            Poly(out)
        }
        fn horner(&self, u: f64) -> f64 {
            self.0.iter().rev().fold(0.0, |acc, c| acc * u + c)
        }
    }

    /// Expands every basis function N_{i,p} restricted to knot span `span`
    /// into an explicit polynomial via the Cox-de Boor definition.
    fn basis_polys(knots: &[f64], degree: usize, count: usize, span: usize) -> Vec<Poly> {
        let m = knots.len() - 1;
        let mut cur: Vec<Poly> = (0..m)
            .map(|i| if i == span { Poly(vec![1.0]) } else { Poly::zero() })
            .collect();
        for p in 1..=degree {
            let mut next = Vec::with_capacity(m - p);
            for i in 0..m - p {
                let mut term = Poly::zero();
                let d1 = knots[i + p] - knots[i];
                if d1 > 0.0 {
                    term = term.add(&cur[i].mul_linear(-knots[i] / d1, 1.0 / d1));
                }
                let d2 = knots[i + p + 1] - knots[i + 1];
                if d2 > 0.0 {
                    term = term.add(&cur[i + 1].mul_linear(knots[i + p + 1] / d2, -1.0 / d2));
                }
                next.push(term);
            }
            cur = next;
        }
        cur.truncate(count);
        cur
    }

    fn random_curve(rng: &mut ChaCha8Rng, degree: usize, count: usize, rational: bool) -> BSplineCurve {
        let controls: Vec<Vec3> = (0..count)
            .map(|_| Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect();
        let spans = count - degree;
        let mut interior: Vec<f64> = (1..spans).map(|_| rng.random_range(0.05..0.95)).collect();
        interior.sort_by(f64::total_cmp);
        let mut knots = vec![0.0; degree + 1];
        knots.extend(interior);
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        let weights = rational.then(|| (0..count).map(|_| rng.random_range(0.5..2.0)).collect());
        BSplineCurve::new(degree, knots, controls, weights).unwrap()
    }

    #[test]
    fn cubic_matches_expanded_polynomial_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let curve = random_curve(&mut rng, 3, 7, false);
        for &u in &[0.0, 0.37, 0.5, 0.81, 1.0] {
            let span = find_span(3, &curve.knots, curve.controls.len(), u);
            let polys = basis_polys(&curve.knots, 3, curve.controls.len(), span);
            let mut expected = Vec3::zeros();
            for (i, poly) in polys.iter().enumerate() {
                expected += curve.controls[i] * poly.horner(u);
            }
            let (got, _) = curve.eval(u).unwrap();
            assert!((got - expected).norm() < 1e-12, "u={u}: {got} vs {expected}");
        }
    }

    #[test]
    fn basis_functions_partition_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let curve = random_curve(&mut rng, 4, 9, false);
        for k in 0..=50 {
            let u = k as f64 / 50.0;
            let span = find_span(4, &curve.knots, 9, u);
            let (n, dn) = basis_with_derivative(span, u, 4, &curve.knots);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            assert!(dn.iter().sum::<f64>().abs() < 1e-10);
        }
    }

    #[test]
    fn rational_derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let curve = random_curve(&mut rng, 3, 8, true);
        let h = 1e-5;
        for _ in 0..100 {
            let u = rng.random_range(0.01..0.99);
            let (_, d) = curve.eval(u).unwrap();
            let fd = (curve.eval(u + h).unwrap().0 - curve.eval(u - h).unwrap().0) / (2.0 * h);
            assert!((d - fd).norm() / d.norm().max(1e-3) < 1e-5);
        }
    }

    fn max_deviation(a: &BSplineCurve, b: &BSplineCurve) -> f64 {
        (0..50)
            .map(|k| {
                let u = k as f64 / 49.0;
                (a.eval(u).unwrap().0 - b.eval(u).unwrap().0).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn knot_insertion_preserves_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let curve = random_curve(&mut rng, 3, 6, true);
        let refined = curve.insert_knot(0.5).unwrap();
        assert_eq!(refined.controls.len(), 7);
        assert_eq!(refined.knots.len(), curve.knots.len() + 1);
        assert!(max_deviation(&curve, &refined) < 1e-9);
    }

    #[test]
    fn repeated_insertion_saturates_at_degree() {
        let curve = BSplineCurve::clamped_uniform(
            3,
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 2.0, 0.0),
                Vec3::new(2.0, -1.0, 1.0),
                Vec3::new(3.0, 0.5, 0.0),
                Vec3::new(4.0, 0.0, -1.0),
            ],
        )
        .unwrap();
        let mut c = curve.clone();
        // knot 0.5 already present once
        for _ in 0..2 {
            c = c.insert_knot(0.5).unwrap();
            c.validate().unwrap();
        }
        assert_eq!(multiplicity(&c.knots, 0.5), 3);
        assert!(max_deviation(&curve, &c) < 1e-9);
        assert!(c.insert_knot(0.5).is_err());
    }

    #[test]
    fn degree_elevation_preserves_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for rational in [false, true] {
            let curve = random_curve(&mut rng, 3, 7, rational);
            let up = curve.elevate_degree().unwrap();
            assert_eq!(up.degree, 4);
            up.validate().unwrap();
            assert!(max_deviation(&curve, &up) < 1e-9);
        }
    }

    #[test]
    fn elevation_rejects_unclamped() {
        let c = BSplineCurve::new(
            2,
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            None,
        )
        .unwrap();
        assert!(c.elevate_degree().is_err());
    }

    #[test]
    fn invalid_knots_rejected() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
        assert!(BSplineCurve::new(3, vec![0.0; 7], pts.clone(), None).is_err());
        assert!(BSplineCurve::new(3, vec![0.0, 0.0, 0.0, 1.0, 0.5, 1.0, 1.0, 1.0], pts.clone(), None).is_err());
        assert!(BSplineCurve::new(3, vec![0., 0., 0., 0., 1., 1., 1., 1.], pts.clone(), Some(vec![1.0, -1.0, 1.0, 1.0])).is_err());
        assert!(BSplineCurve::new(3, vec![0., 0., 0., 0., 1., 1., 1., 1.], pts, None).is_ok());
    }

    fn random_surface(rng: &mut ChaCha8Rng) -> BSplineSurface {
        let (nu, nv) = (5, 4);
        let controls = (0..nu * nv)
            .map(|k| {
                let (i, j) = (k / nv, k % nv);
                Vec3::new(i as f64, j as f64, rng.random_range(-0.5..0.5))
            })
            .collect();
        let weights = Some((0..nu * nv).map(|_| rng.random_range(0.7..1.5)).collect());
        BSplineSurface::new(
            3,
            2,
            vec![0.0, 0.0, 0.0, 0.0, 0.4, 1.0, 1.0, 1.0, 1.0],
            vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0],
            nu,
            nv,
            controls,
            weights,
        )
        .unwrap()
    }

    #[test]
    fn surface_partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = random_surface(&mut rng);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let (u, v) = (rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
            let (_, su, sv) = s.eval(u, v).unwrap();
            let fu = (s.eval(u + h, v).unwrap().0 - s.eval(u - h, v).unwrap().0) / (2.0 * h);
            let fv = (s.eval(u, v + h).unwrap().0 - s.eval(u, v - h).unwrap().0) / (2.0 * h);
            worst = worst.max((su - fu).norm() / su.norm()).max((sv - fv).norm() / sv.norm());
        }
        assert!(worst < 1e-6, "max rel err {worst}");
    }

    #[test]
    fn surface_refinement_preserves_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_surface(&mut rng);
        let variants = [
            s.insert_knot(Direction::U, 0.7).unwrap(),
            s.insert_knot(Direction::V, 0.25).unwrap(),
            s.elevate_degree(Direction::U).unwrap(),
            s.elevate_degree(Direction::V).unwrap(),
        ];
        for r in &variants {
            r.validate().unwrap();
            for k in 0..=20 {
                for l in 0..=20 {
                    let (u, v) = (k as f64 / 20.0, l as f64 / 20.0);
                    let d = (s.eval(u, v).unwrap().0 - r.eval(u, v).unwrap().0).norm();
                    assert!(d < 1e-9);
                }
            }
        }
    }
}
