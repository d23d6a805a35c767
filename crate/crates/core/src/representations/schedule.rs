use crate::numerics::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchKind {
    Unlabeled,
    Labeled,
}

/// Order `n_unlabeled` and `n_labeled` batches so that each kind is spread
/// evenly through the epoch.
pub fn interleave(n_unlabeled: usize, n_labeled: usize) -> Vec<BatchKind> {
    let total = n_unlabeled + n_labeled;
    let mut out = Vec::with_capacity(total);
    let (mut u, mut l) = (0usize, 0usize);
    for _ in 0..total {
        // Take whichever kind is further behind its ideal evenly-spaced
        // position; the (k + ½)/n midpoints keep both ends symmetric.
        let lag_l = if l < n_labeled {
            (2 * l + 1) as f64 / (2 * n_labeled) as f64
        } else {
            f64::INFINITY
        };
        let lag_u = if u < n_unlabeled {
            (2 * u + 1) as f64 / (2 * n_unlabeled) as f64
        } else {
            f64::INFINITY
        };
        if lag_l < lag_u {
            out.push(BatchKind::Labeled);
            l += 1;
        } else {
            out.push(BatchKind::Unlabeled);
            u += 1;
        }
    }
    out
}

/// One epoch's labeled stream: every class is brought up to the majority
/// count by cycling through a shuffled copy of its members, then the whole
/// stream is shuffled. Returns row indices into `labels`.
pub fn upsample_balanced(labels: &[usize], n_classes: usize, rng: &mut Rng) -> Vec<usize> {
    let mut members = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }
    let target = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(target * n_classes);
    for m in members.iter_mut().filter(|m| !m.is_empty()) {
        rng.shuffle(m);
        out.extend(m.iter().cycle().take(target).copied());
    }
    rng.shuffle(&mut out);
    out
}
