//! Local-maximum search with topographic prominence.
//!
//! The sequence is treated as if padded by zeros on both sides, which is the
//! natural boundary for non-negative data such as `P_n` or spectral
//! magnitudes: a maximum at the first sample still counts.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub height: f64,
    pub prominence: f64,
}

/// Indices of local maxima. Flat tops report their middle sample.
pub fn local_maxima(v: &[f64]) -> Vec<usize> {
    let n = v.len();
    let at = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { v[i as usize] };
    let mut out = Vec::new();
    let mut i = 0usize;
    while i < n {
        if v[i] > at(i as isize - 1) {
            let mut ahead = i + 1;
            while ahead < n && v[ahead] == v[i] {
                ahead += 1;
            }
            if at(ahead as isize) < v[i] {
                out.push((i + ahead - 1) / 2);
            }
            i = ahead;
        } else {
            i += 1;
        }
    }
    out
}

/// Prominence of the maximum at `peak`: its height above the higher of the
/// two lowest points reachable on either side before meeting higher ground.
pub fn prominence(v: &[f64], peak: usize) -> f64 {
    let h = v[peak];
    let mut left_min = h;
    let mut i = peak as isize;
    loop {
        if i < 0 {
            left_min = left_min.min(0.0);
            break;
        }
        let x = v[i as usize];
        if x > h {
            break;
        }
        left_min = left_min.min(x);
        i -= 1;
    }
    let mut right_min = h;
    let mut i = peak;
    loop {
        if i >= v.len() {
            right_min = right_min.min(0.0);
            break;
        }
        if v[i] > h {
            break;
        }
        right_min = right_min.min(v[i]);
        i += 1;
    }
    h - left_min.max(right_min)
}

/// Keeps the highest peaks so that no two survivors are closer than
/// `distance` samples. Ties are broken towards the lower index.
pub fn select_by_distance(v: &[f64], peaks: &[usize], distance: usize) -> Vec<usize> {
    if distance <= 1 {
        return peaks.to_vec();
    }
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| v[peaks[b]].total_cmp(&v[peaks[a]]).then(a.cmp(&b)));
    let mut keep = vec![true; peaks.len()];
    for &j in &order {
        if !keep[j] {
            continue;
        }
        let mut k = j;
        while k > 0 && peaks[j] - peaks[k - 1] < distance {
            keep[k - 1] = false;
            k -= 1;
        }
        let mut k = j + 1;
        while k < peaks.len() && peaks[k] - peaks[j] < distance {
            keep[k] = false;
            k += 1;
        }
    }
    peaks.iter().zip(keep).filter(|(_, k)| *k).map(|(&p, _)| p).collect()
}

/// Local maxima at least `distance` apart with prominence `>= min_prominence`,
/// in index order.
pub fn find_peaks(v: &[f64], min_prominence: f64, distance: usize) -> Vec<Peak> {
    let maxima = local_maxima(v);
    select_by_distance(v, &maxima, distance)
        .into_iter()
        .map(|index| Peak { index, height: v[index], prominence: prominence(v, index) })
        .filter(|p| p.prominence >= min_prominence)
        .collect()
}

/// Full width at half maximum of the peak at `index`, in samples, with linear
/// interpolation of the half-height crossings.
pub fn fwhm(v: &[f64], index: usize) -> f64 {
    let half = 0.5 * v[index];
    let mut left = index as f64;
    let mut i = index;
    while i > 0 {
        if v[i - 1] < half {
            left = (i - 1) as f64 + (half - v[i - 1]) / (v[i] - v[i - 1]);
            break;
        }
        i -= 1;
        left = i as f64;
    }
    let mut right = index as f64;
    let mut i = index;
    while i + 1 < v.len() {
        if v[i + 1] < half {
            right = i as f64 + (v[i] - half) / (v[i] - v[i + 1]);
            break;
        }
        i += 1;
        right = i as f64;
    }
    right - left
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxima_with_plateaus_and_edges() {
        assert_eq!(local_maxima(&[3.0, 1.0, 2.0, 2.0, 2.0, 0.0, 1.0]), vec![0, 3, 6]);
        assert_eq!(local_maxima(&[0.0, 0.0, 0.0]), Vec::<usize>::new());
        assert_eq!(local_maxima(&[1.0, 2.0, 2.0, 3.0]), vec![3]);
    }

    #[test]
    fn prominence_uses_the_higher_base() {
        let v = [0.0, 5.0, 1.0, 3.0, 2.0, 4.0, 0.0];
        assert_eq!(prominence(&v, 1), 5.0);
        assert_eq!(prominence(&v, 3), 1.0);
        assert_eq!(prominence(&v, 5), 3.0);
    }

    #[test]
    fn distance_keeps_the_highest() {
        let v = [0.0, 3.0, 0.0, 4.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        let m = local_maxima(&v);
        assert_eq!(select_by_distance(&v, &m, 3), vec![3, 7]);
        assert_eq!(select_by_distance(&v, &m, 1), vec![1, 3, 7]);
    }

    #[test]
    fn fwhm_of_a_triangle() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0, 0.0];
        assert!((fwhm(&v, 4) - 4.0).abs() < 1e-12);
    }
}
