//! Quadrature rules on the reference triangle and segment.

/// Degree-5, 7-point rule on the triangle: barycentric coordinates and
/// weights summing to 1 (multiply by the element area).
pub const TRI7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059715871789770;
    const B1: f64 = 0.470142064105115;
    const W1: f64 = 0.132394152788506;
    const A2: f64 = 0.797426985353087;
    const B2: f64 = 0.101286507323456;
    const W2: f64 = 0.125939180544827;
    const C: f64 = 1.0 / 3.0;
    [
        ([C, C, C], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// 3-point Gauss–Legendre rule on [0, 1]: (abscissa, weight), weights sum to 1.
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112701665379258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887298334620741_7, 5.0 / 18.0),
];
