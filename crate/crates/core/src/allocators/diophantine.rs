//! Linear Diophantine solver on top of the extended Euclidean algorithm.

/// Greatest common divisor by the Euclidean algorithm.
pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Extended Euclid: returns `(g, x, y)` with `a·x + b·y = g = gcd(a, b)`.
pub fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        return (a, 1, 0);
    }
    let (g, x, y) = extended_gcd(b, a % b);
    (g, y, x - (a / b) * y)
}

/// One solution family of `e·x + f·y = target`.
///
/// All integer solutions are `(base_x + t·step_x, base_y + t·step_y)` for
/// integer `t`; the steps satisfy `e·step_x + f·step_y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiophantineSolution {
    pub base_x: i64,
    pub base_y: i64,
    pub step_x: i64,
    pub step_y: i64,
    pub gcd: u64,
}

impl DiophantineSolution {
    /// The `t`-th member of the family.
    pub fn solution_at(&self, t: i64) -> (i64, i64) {
        (self.base_x + t * self.step_x, self.base_y + t * self.step_y)
    }
}

/// Solves `e·x + f·y = target` over the integers.
///
/// Returns `None` exactly when `gcd(e, f)` does not divide `target`.
pub fn solve_linear_diophantine(e: u64, f: u64, target: i64) -> Option<DiophantineSolution> {
    assert!(e >= 1 && f >= 1, "coefficients must be positive");
    let g = gcd(e, f);
    if target % g as i64 != 0 {
        return None;
    }
    let (g_signed, x0, y0) = extended_gcd(e as i64, f as i64);
    debug_assert_eq!(g_signed, g as i64);
    let scale = target / g as i64;
    Some(DiophantineSolution {
        base_x: x0 * scale,
        base_y: y0 * scale,
        step_x: (f / g) as i64,
        step_y: -((e / g) as i64),
        gcd: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_covers_spot_solutions() {
        let sol = solve_linear_diophantine(5, 10, 25).unwrap();
        // Spot solutions (5,0), (3,1), (1,2) must all appear in the family.
        for target in [(5i64, 0i64), (3, 1), (1, 2)] {
            let t = (target.0 - sol.base_x) / sol.step_x;
            assert_eq!(sol.solution_at(t), target);
        }
        assert_eq!(sol.gcd, 5);
    }

    #[test]
    fn divisibility_failure_has_no_solution() {
        assert_eq!(solve_linear_diophantine(4, 6, 7), None);
    }

    #[test]
    fn unit_coefficient_always_solves() {
        for f in 1..10u64 {
            for g in -10..10i64 {
                let sol = solve_linear_diophantine(1, f, g).unwrap();
                let (x, y) = sol.solution_at(0);
                assert_eq!(x + f as i64 * y, g);
            }
        }
    }

    #[test]
    fn steps_annihilate() {
        let sol = solve_linear_diophantine(12, 18, 30).unwrap();
        assert_eq!(12 * sol.step_x + 18 * sol.step_y, 0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Solvability agrees with brute force over one full residue
            // cycle of x (a cycle of length f/gcd always contains a solution
            // when one exists anywhere).
            #[test]
            fn matches_brute_force(e in 1u64..=50, f in 1u64..=50, target in -50i64..=50) {
                let solved = solve_linear_diophantine(e, f, target);
                let brute = (0..f as i64).any(|x| {
                    let rest = target - e as i64 * x;
                    rest % f as i64 == 0
                });
                prop_assert_eq!(solved.is_some(), brute);
                if let Some(sol) = solved {
                    for t in -3..=3 {
                        let (x, y) = sol.solution_at(t);
                        prop_assert_eq!(e as i64 * x + f as i64 * y, target);
                    }
                }
            }
        }
    }
}
