//! Symmetric quadrature on triangles in barycentric coordinates.
//!
//! All consistent (non-lumped) integrals use the 16-point Dunavant rule,
//! which is exact for polynomials up to degree 8. That covers the velocity
//! convection term with bubble-enriched fields (degree 8) and every other
//! product the schemes assemble.

/// A quadrature point: barycentric coordinates and weight normalized so that
/// the weights sum to one (multiply by the element area).
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

const CENTROID_W: f64 = 0.144_315_607_677_787;
const ORBIT3: [(f64, f64); 3] = [
    (0.459_292_588_292_723, 0.095_091_634_267_285),
    (0.170_569_307_751_760, 0.103_217_370_534_718),
    (0.050_547_228_317_031, 0.032_458_497_623_198),
];
const ORBIT6: (f64, f64, f64) = (0.008_394_777_409_958, 0.263_112_829_634_638, 0.027_230_314_174_435);

/// Degree-8 rule with 16 points.
pub fn degree8() -> &'static [QuadPoint] {
    static RULE: std::sync::OnceLock<Vec<QuadPoint>> = std::sync::OnceLock::new();
    RULE.get_or_init(|| {
        let mut pts = Vec::with_capacity(16);
        pts.push(QuadPoint {
            bary: [1.0 / 3.0; 3],
            weight: CENTROID_W,
        });
        for &(a, w) in &ORBIT3 {
            let b = 1.0 - 2.0 * a;
            for bary in [[a, a, b], [a, b, a], [b, a, a]] {
                pts.push(QuadPoint { bary, weight: w });
            }
        }
        let (a, b, w) = ORBIT6;
        let c = 1.0 - a - b;
        for bary in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            pts.push(QuadPoint { bary, weight: w });
        }
        // renormalize the tabulated weights so constants integrate exactly
        let total: f64 = pts.iter().map(|p| p.weight).sum();
        for p in &mut pts {
            p.weight /= total;
        }
        pts
    })
}
