//! Deterministic seeded generation of test data.
//!
//! A tiny splitmix64 generator, owned by the crate so that generated suites
//! never drift across dependency upgrades or platforms. No wall-clock or OS
//! entropy anywhere; everything derives from an explicit seed.

use crate::construct::ball_from_points;
use crate::matrix::Matrix;
use crate::rational::{rat, Rational};
use crate::space::{lower_isometry_bound, op_norm, Operator, PolyBanachSpace};
use num_traits::One;

#[derive(Clone, Debug)]
pub struct SeededGen {
    state: u64,
}

impl SeededGen {
    pub fn new(seed: u64) -> Self {
        SeededGen {
            state: seed ^ 0x9e37_79b9_7f4a_7c15,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        self.next_u64() % n
    }

    pub fn range(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo < hi);
        lo + self.below((hi - lo) as u64) as i64
    }

    /// A rational with numerator in `[-num_bound, num_bound]` and
    /// denominator in `[1, den_bound]`.
    pub fn rational(&mut self, num_bound: i64, den_bound: i64) -> Rational {
        let p = self.range(-num_bound, num_bound + 1);
        let q = self.range(1, den_bound + 1);
        rat(p, q)
    }

    /// A random symmetric full-dimensional ball: the cross-polytope plus a
    /// few random symmetric vertex pairs, coordinates bounded by
    /// `den_bound` in numerator and denominator.
    pub fn space(&mut self, dim: usize, den_bound: i64) -> PolyBanachSpace {
        if dim == 0 {
            return PolyBanachSpace::trivial();
        }
        loop {
            let mut points = Vec::new();
            for i in 0..dim {
                for s in [1i64, -1] {
                    let mut v = vec![Rational::from_integer(0.into()); dim];
                    v[i] = rat(s, 1);
                    points.push(v);
                }
            }
            let extra = self.below(3) as usize;
            for _ in 0..extra {
                let v: Vec<Rational> = (0..dim)
                    .map(|_| self.rational(den_bound, den_bound))
                    .collect();
                if v.iter().all(|c| c == &Rational::from_integer(0.into())) {
                    continue;
                }
                let neg: Vec<Rational> = v.iter().map(|x| -x).collect();
                points.push(v);
                points.push(neg);
            }
            if let Ok(ball) = ball_from_points(dim, points) {
                if ball.vertex_rank() == dim {
                    if let Ok(space) = PolyBanachSpace::new(ball) {
                        return space;
                    }
                }
            }
        }
    }

    /// A 1-bounded operator `domain -> codomain`: a random matrix scaled
    /// down to operator norm at most one.
    pub fn one_bounded(
        &mut self,
        domain: &PolyBanachSpace,
        codomain: &PolyBanachSpace,
    ) -> Operator {
        let m = Matrix::from_rows_shaped(
            codomain.dim(),
            domain.dim(),
            (0..codomain.dim())
                .map(|_| (0..domain.dim()).map(|_| self.rational(2, 2)).collect())
                .collect(),
        );
        let t = Operator::new(domain.clone(), codomain.clone(), m).expect("shape");
        let n = op_norm(&t);
        if n <= Rational::one() {
            t
        } else {
            t.scale(&n.recip())
        }
    }

    /// An exact `eps`-isometry `X -> Y` built by blending the coordinate
    /// inclusion of `X` into the sum-normed `X (+) extra` with a shrink that
    /// keeps the lower bound above `1 - eps`. The codomain ball is the sum
    /// ball, so the inclusion is isometric before shrinking.
    pub fn eps_isometry(
        &mut self,
        dim_domain: usize,
        dim_extra: usize,
        den_bound: i64,
        eps: &Rational,
    ) -> Operator {
        let x = self.space(dim_domain, den_bound);
        let dim_cod = dim_domain + dim_extra;
        // Sum ball of ball(X) x 0 and 0 x ball(l1(extra)).
        let mut points = Vec::new();
        for v in x.ball().vertices() {
            let mut p = v.clone();
            p.extend(vec![Rational::from_integer(0.into()); dim_extra]);
            points.push(p);
        }
        for i in 0..dim_extra {
            for s in [1i64, -1] {
                let mut p = vec![Rational::from_integer(0.into()); dim_cod];
                p[dim_domain + i] = rat(s, 1);
                points.push(p);
            }
        }
        let y = PolyBanachSpace::new(ball_from_points(dim_cod, points).expect("sum ball"))
            .expect("sum ball space");
        let incl = Operator::coordinate_inclusion(&x, &y).expect("inclusion");
        // Shrink by a random factor in [1-eps, 1] with small denominator.
        let k = self.range(0, 4); // factor 1 - eps k/4
        let factor = Rational::one() - eps * rat(k, 4);
        let t = incl.scale(&factor);
        debug_assert!(op_norm(&t) <= Rational::one());
        debug_assert!(lower_isometry_bound(&t).expect("bound") >= Rational::one() - eps);
        t
    }
}
