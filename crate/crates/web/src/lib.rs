//! Browser demo: classify a chart point, scan a 2D slice of the chart, and
//! diagonalize a random flat symmetric form. Each export returns JSON.

use nalgebra::DVector;
use nullitylab::analyzer::{analyze_point, AnalyzerConfig, CaseTag, ClassificationReport};
use nullitylab::bilinear::{
    diagonal_defect, flatness_residual, moore_diagonalize, nullity_brute_force, rho_orthonormality,
    BilinearForm,
};
use nullitylab::catalog::{by_name, list_catalog, ImmersionDef};
use nullitylab::jets::ChartPoint;
use nullitylab::linalg::random_orthogonal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const MAX_RESOLUTION: usize = 64;

/// Cases in the order used for heatmap indices.
pub const CASES: [CaseTag; 7] = [
    CaseTag::TrivialEqualNullities,
    CaseTag::FlatExtreme,
    CaseTag::CompositionBound,
    CaseTag::RankOneLK1,
    CaseTag::RankOneLK0Ruled,
    CaseTag::Unclassified,
    CaseTag::StratumBoundary,
];

#[derive(Debug, Serialize)]
pub struct MemberInfo {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub domain: Vec<[f64; 2]>,
    pub center: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Heatmap {
    pub axes: [usize; 2],
    pub resolution: usize,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub cases: Vec<String>,
    /// Row-major, `y` outer: index into `cases`, or -1 where the analysis failed.
    pub case_index: Vec<i32>,
    pub mu: Vec<i32>,
    pub nu_g: Vec<i32>,
}

#[derive(Debug, Serialize)]
pub struct Diagonalization {
    pub n: usize,
    pub target: usize,
    pub rank: usize,
    /// `values[i][j]` is the image of `(e_i, e_j)`.
    pub values: Vec<Vec<Vec<f64>>>,
    pub flatness: f64,
    pub z: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub off_diagonal: f64,
    pub rho_orthonormality: f64,
}

fn member(name: &str) -> Result<ImmersionDef, String> {
    by_name(name).map_err(|e| e.to_string())
}

pub fn members() -> Vec<MemberInfo> {
    list_catalog()
        .into_iter()
        .map(|d| MemberInfo {
            center: d.center().coords,
            name: d.name,
            n: d.n,
            p: d.p,
            domain: d.domain,
        })
        .collect()
}

pub fn classify(name: &str, coords: &[f64]) -> Result<ClassificationReport, String> {
    let def = member(name)?;
    let x = ChartPoint::new(coords.to_vec());
    if !def.contains(&x) {
        return Err(format!(
            "{:?} lies outside the chart box of `{name}`",
            x.coords
        ));
    }
    analyze_point(&def, &x, &AnalyzerConfig::default()).map_err(|e| e.to_string())
}

/// Scan of the plane through `base` spanned by two chart axes.
pub fn slice(
    name: &str,
    axes: [usize; 2],
    resolution: usize,
    base: &[f64],
) -> Result<Heatmap, String> {
    let def = member(name)?;
    if axes[0] == axes[1] || axes.iter().any(|&a| a >= def.n) {
        return Err(format!("axes {axes:?} for a {}-dimensional chart", def.n));
    }
    if !(2..=MAX_RESOLUTION).contains(&resolution) {
        return Err(format!("resolution must lie in 2..={MAX_RESOLUTION}"));
    }
    if base.len() != def.n {
        return Err(format!("base point needs {} coordinates", def.n));
    }
    let range = |a: usize| {
        let [lo, hi] = def.domain[a];
        [lo.max(-3.0), hi.min(3.0)]
    };
    let (xr, yr) = (range(axes[0]), range(axes[1]));
    let at = |r: [f64; 2], i: usize| r[0] + (r[1] - r[0]) * i as f64 / (resolution - 1) as f64;
    let cfg = AnalyzerConfig::default();
    let mut map = Heatmap {
        axes,
        resolution,
        x_range: xr,
        y_range: yr,
        cases: CASES.iter().map(|c| c.to_string()).collect(),
        case_index: Vec::with_capacity(resolution * resolution),
        mu: Vec::with_capacity(resolution * resolution),
        nu_g: Vec::with_capacity(resolution * resolution),
    };
    for j in 0..resolution {
        for i in 0..resolution {
            let mut coords = base.to_vec();
            coords[axes[0]] = at(xr, i);
            coords[axes[1]] = at(yr, j);
            match analyze_point(&def, &ChartPoint::new(coords), &cfg) {
                Ok(r) => {
                    map.case_index.push(
                        CASES
                            .iter()
                            .position(|&c| c == r.case)
                            .map_or(-1, |k| k as i32),
                    );
                    map.mu.push(r.mu as i32);
                    map.nu_g.push(r.nu_g as i32);
                }
                Err(_) => {
                    map.case_index.push(-1);
                    map.mu.push(-1);
                    map.nu_g.push(-1);
                }
            }
        }
    }
    Ok(map)
}

/// A flat symmetric form `sum_s lambda_s <q_s, x><q_s, y> rho_s` in random
/// orthonormal frames, and the result of diagonalizing it.
pub fn random_flat_form(
    seed: u64,
    n: usize,
    target: usize,
    rank: usize,
) -> Result<Diagonalization, String> {
    if !(1..=6).contains(&n) || !(1..=4).contains(&target) || rank > n.min(target) {
        return Err("need 1 <= n <= 6, 1 <= target <= 4 and rank <= min(n, target)".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(n, &mut rng);
    let rho = random_orthogonal(target, &mut rng);
    let lambda: Vec<f64> = (0..rank)
        .map(|_| {
            let s: f64 = rng.gen_range(0.5..2.0);
            if rng.gen_bool(0.5) {
                s
            } else {
                -s
            }
        })
        .collect();
    let b = BilinearForm::from_fn(n, n, target, |i, j| {
        let mut v = DVector::zeros(target);
        for s in 0..rank {
            v += rho.column(s) * (lambda[s] * q[(i, s)] * q[(j, s)]);
        }
        v
    });
    let nullity = nullity_brute_force(&b, 1e-8);
    let pairs = moore_diagonalize(&b, &nullity).map_err(|e| e.to_string())?;
    let scale = b.max_norm().max(1.0);
    Ok(Diagonalization {
        n,
        target,
        rank: pairs.len(),
        values: (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| b.value(i, j).iter().copied().collect())
                    .collect()
            })
            .collect(),
        flatness: flatness_residual(&b),
        z: pairs
            .iter()
            .map(|p| p.z.iter().copied().collect())
            .collect(),
        rho: pairs
            .iter()
            .map(|p| p.rho.iter().copied().collect())
            .collect(),
        lambda: pairs
            .iter()
            .map(|p| b.apply(&p.z, &p.z).dot(&p.rho))
            .collect(),
        off_diagonal: diagonal_defect(&b, &pairs) / scale,
        rho_orthonormality: rho_orthonormality(&pairs),
    })
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = catalog)]
pub fn catalog_js() -> Result<String, JsValue> {
    json(Ok(members()))
}

#[wasm_bindgen(js_name = classifyPoint)]
pub fn classify_js(name: &str, coords: Vec<f64>) -> Result<String, JsValue> {
    json(classify(name, &coords))
}

#[wasm_bindgen(js_name = sliceHeatmap)]
pub fn slice_js(
    name: &str,
    axis_x: usize,
    axis_y: usize,
    resolution: usize,
    base: Vec<f64>,
) -> Result<String, JsValue> {
    json(slice(name, [axis_x, axis_y], resolution, &base))
}

#[wasm_bindgen(js_name = randomFlatForm)]
pub fn random_flat_form_js(
    seed: u32,
    n: usize,
    target: usize,
    rank: usize,
) -> Result<String, JsValue> {
    json(random_flat_form(seed as u64, n, target, rank))
}
