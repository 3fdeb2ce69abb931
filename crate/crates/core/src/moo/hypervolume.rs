use super::archive::dominates_unchecked;
use super::MooError;

/// Volume of the region dominated by `points` and bounded by `reference`
/// (minimization). Points that do not strictly improve on the reference in
/// every component contribute nothing.
///
/// Two dimensions use a sweep; higher dimensions slice along the last axis
/// and recurse.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<f64, MooError> {
    let dim = reference.len();
    if dim == 0 {
        return Err(MooError::Dimension { expected: 1, got: 0 });
    }
    for p in points {
        if p.len() != dim {
            return Err(MooError::Dimension {
                expected: dim,
                got: p.len(),
            });
        }
    }
    let inside: Vec<&[f64]> = points
        .iter()
        .map(Vec::as_slice)
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x < r))
        .collect();
    Ok(volume(&inside, reference))
}

fn volume(points: &[&[f64]], reference: &[f64]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    match reference.len() {
        1 => reference[0] - points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => sweep_2d(points, reference),
        d => {
            let last = d - 1;
            let mut sorted: Vec<&[f64]> = points.to_vec();
            sorted.sort_by(|a, b| a[last].total_cmp(&b[last]));
            let mut total = 0.0;
            let mut slab: Vec<&[f64]> = Vec::with_capacity(sorted.len());
            for (i, p) in sorted.iter().enumerate() {
                slab.push(&p[..last]);
                let top = sorted.get(i + 1).map_or(reference[last], |q| q[last]);
                let height = top - p[last];
                if height > 0.0 {
                    let front = reduce(&slab);
                    total += height * volume(&front, &reference[..last]);
                }
            }
            total
        }
    }
}

fn reduce<'a>(points: &[&'a [f64]]) -> Vec<&'a [f64]> {
    let mut out: Vec<&[f64]> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let beaten = points
            .iter()
            .enumerate()
            .any(|(j, q)| dominates_unchecked(q, p) || (j < i && q == p));
        if !beaten {
            out.push(p);
        }
    }
    out
}

fn sweep_2d(points: &[&[f64]], reference: &[f64]) -> f64 {
    let mut sorted: Vec<&[f64]> = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut total = 0.0;
    let mut ceiling = reference[1];
    for p in sorted {
        if p[1] < ceiling {
            total += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    total
}
