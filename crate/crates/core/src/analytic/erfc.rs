//! Complementary error function `erfc(x) = (2/sqrt(pi)) * integral_x^inf e^(-t^2) dt`.
//!
//! The method and coefficients follow FreeBSD's msun `s_erf.c` (originally
//! developed at SunPro, 1993): rational approximations on four ranges, with
//! the asymptotic regime evaluated as `exp(-x^2 - 0.5625 + R/S) / x` using a
//! split-precision trick for `x^2`. Relative error is below 1e-15 across the
//! whole range used here; the unit tests pin it against a 50-digit reference
//! table at better than 1e-12 for |x| <= 10.

const ERX: f64 = 8.45062911510467529297e-01;

// Rational approximation on [0, 0.84375].
const PP0: f64 = 1.28379167095512558561e-01;
const PP1: f64 = -3.25042107247001499370e-01;
const PP2: f64 = -2.84817495755985104766e-02;
const PP3: f64 = -5.77027029648944159157e-03;
const PP4: f64 = -2.37630166566501626084e-05;
const QQ1: f64 = 3.97917223959155352819e-01;
const QQ2: f64 = 6.50222499887672944485e-02;
const QQ3: f64 = 5.08130628187576562776e-03;
const QQ4: f64 = 1.32494738004321644526e-04;
const QQ5: f64 = -3.96022827877536812320e-06;

// Rational approximation on [0.84375, 1.25], expanded around 1.
const PA0: f64 = -2.36211856075265944077e-03;
const PA1: f64 = 4.14856118683748331666e-01;
const PA2: f64 = -3.72207876035701323847e-01;
const PA3: f64 = 3.18346619901161753674e-01;
const PA4: f64 = -1.10894694282396677476e-01;
const PA5: f64 = 3.54783043256182359371e-02;
const PA6: f64 = -2.16637559486879084300e-03;
const QA1: f64 = 1.06420880400844228286e-01;
const QA2: f64 = 5.40397917702171048937e-01;
const QA3: f64 = 7.18286544141962662868e-02;
const QA4: f64 = 1.26171219808761642112e-01;
const QA5: f64 = 1.36370839120290507362e-02;
const QA6: f64 = 1.19844998467991074170e-02;

// Asymptotic correction on [1.25, 1/0.35].
const RA0: f64 = -9.86494403484714822705e-03;
const RA1: f64 = -6.93858572707181764372e-01;
const RA2: f64 = -1.05586262253232909814e+01;
const RA3: f64 = -6.23753324503260060396e+01;
const RA4: f64 = -1.62396669462573470355e+02;
const RA5: f64 = -1.84605092906711035994e+02;
const RA6: f64 = -8.12874355063065934246e+01;
const RA7: f64 = -9.81432934416914548592e+00;
const SA1: f64 = 1.96512716674392571292e+01;
const SA2: f64 = 1.37657754143519042600e+02;
const SA3: f64 = 4.34565877475229228821e+02;
const SA4: f64 = 6.45387271733267880336e+02;
const SA5: f64 = 4.29008140027567833386e+02;
const SA6: f64 = 1.08635005541779435134e+02;
const SA7: f64 = 6.57024977031928170135e+00;
const SA8: f64 = -6.04244152148580987438e-02;

// Asymptotic correction on [1/0.35, 28].
const RB0: f64 = -9.86494292470009928597e-03;
const RB1: f64 = -7.99283237680523006574e-01;
const RB2: f64 = -1.77579549177547519889e+01;
const RB3: f64 = -1.60636384855821916062e+02;
const RB4: f64 = -6.37566443368389627722e+02;
const RB5: f64 = -1.02509513161107724954e+03;
const RB6: f64 = -4.83519191608651397019e+02;
const SB1: f64 = 3.03380607434824582924e+01;
const SB2: f64 = 3.25792512996573918826e+02;
const SB3: f64 = 1.53672958608443695994e+03;
const SB4: f64 = 3.19985821950859553908e+03;
const SB5: f64 = 2.55305040643316442583e+03;
const SB6: f64 = 4.74528541206955367215e+02;
const SB7: f64 = -2.24409524465858183362e+01;

// 2^-56
const TINY: f64 = 1.3877787807814457e-17;

/// Complementary error function.
///
/// Total on all real inputs: `erfc(-inf) = 2`, `erfc(inf) = 0`, NaN
/// propagates.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 2.0;
    }

    let sign = x < 0.0;
    let x = x.abs();

    if x < 0.84375 {
        let temp = if x < TINY {
            x
        } else {
            let z = x * x;
            let r = PP0 + z * (PP1 + z * (PP2 + z * (PP3 + z * PP4)));
            let s = 1.0 + z * (QQ1 + z * (QQ2 + z * (QQ3 + z * (QQ4 + z * QQ5))));
            let y = r / s;
            if x < 0.25 {
                x + x * y
            } else {
                0.5 + (x * y + (x - 0.5))
            }
        };
        return if sign { 1.0 + temp } else { 1.0 - temp };
    }

    if x < 1.25 {
        let s = x - 1.0;
        let p = PA0 + s * (PA1 + s * (PA2 + s * (PA3 + s * (PA4 + s * (PA5 + s * PA6)))));
        let q = 1.0 + s * (QA1 + s * (QA2 + s * (QA3 + s * (QA4 + s * (QA5 + s * QA6)))));
        return if sign { 1.0 + ERX + p / q } else { 1.0 - ERX - p / q };
    }

    if x < 28.0 {
        let s = 1.0 / (x * x);
        let (r, sd) = if x < 1.0 / 0.35 {
            (
                RA0 + s * (RA1 + s * (RA2 + s * (RA3 + s * (RA4 + s * (RA5 + s * (RA6 + s * RA7)))))),
                1.0 + s
                    * (SA1
                        + s * (SA2
                            + s * (SA3 + s * (SA4 + s * (SA5 + s * (SA6 + s * (SA7 + s * SA8))))))),
            )
        } else {
            if sign && x > 6.0 {
                return 2.0;
            }
            (
                RB0 + s * (RB1 + s * (RB2 + s * (RB3 + s * (RB4 + s * (RB5 + s * RB6))))),
                1.0 + s
                    * (SB1 + s * (SB2 + s * (SB3 + s * (SB4 + s * (SB5 + s * (SB6 + s * SB7)))))),
            )
        };
        // Split x into a 32-bit-mantissa head so -x^2 is computed without
        // cancellation: -x^2 = -z^2 + (z - x)(z + x).
        let z = f64::from_bits(x.to_bits() & 0xffff_ffff_0000_0000);
        let v = (-z * z - 0.5625).exp() * ((z - x) * (z + x) + r / sd).exp();
        return if sign { 2.0 - v / x } else { v / x };
    }

    if sign {
        2.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::erfc;

    #[test]
    fn exact_special_points() {
        assert_eq!(erfc(0.0), 1.0);
        assert_eq!(erfc(f64::INFINITY), 0.0);
        assert_eq!(erfc(f64::NEG_INFINITY), 2.0);
        assert!(erfc(f64::NAN).is_nan());
        assert_eq!(erfc(30.0), 0.0);
        assert_eq!(erfc(-30.0), 2.0);
    }

    #[test]
    fn reflection_identity() {
        for &x in &[0.1, 0.7, 1.3, 2.4, 4.9] {
            let lhs = erfc(-x);
            let rhs = 2.0 - erfc(x);
            assert!((lhs - rhs).abs() <= 1e-15 * lhs.max(rhs));
        }
    }

    /// 50-digit mpmath reference values, pinned at the documented accuracy.
    #[test]
    fn matches_high_precision_reference() {
        let reference = [
            (-5.5, 1.9999999999999926),
            (-5.0, 1.9999999999984625),
            (-4.0, 1.9999999845827421),
            (-3.0, 1.9999779095030014),
            (-2.5, 1.9995930479825550),
            (-2.0, 1.9953222650189527),
            (-1.5, 1.9661051464753107),
            (-1.0, 1.8427007929497149),
            (-0.5, 1.5204998778130465),
            (-0.25, 1.2763263901682369),
            (0.0, 1.0),
            (0.25, 0.72367360983176307),
            (0.5, 0.47950012218695346),
            (0.75, 0.28884436634648487),
            (1.0, 0.15729920705028513),
            (1.5, 0.033894853524689273),
            (2.0, 0.0046777349810472658),
            (2.5, 0.00040695201744495894),
            (3.0, 2.2090496998585441e-5),
            (4.0, 1.5417257900280019e-8),
            (5.0, 1.5374597944280349e-12),
            (6.0, 2.1519736712498913e-17),
            (7.0, 4.1838256077794144e-23),
            (8.0, 1.1224297172982927e-29),
            (9.0, 4.1370317465138102e-37),
            (10.0, 2.0884875837625448e-45),
        ];
        for &(x, want) in &reference {
            let got = erfc(x);
            let rel = ((got - want) / want).abs();
            assert!(rel <= 1e-12, "erfc({x}): got {got:e}, want {want:e}, rel err {rel:e}");
        }
    }
}
