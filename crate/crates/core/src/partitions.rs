//! Set-partition enumeration by restricted growth strings.

/// Calls `visit(labels, blocks)` once for every set partition of `n` items.
///
/// `labels[i]` is the block index of item i; labels satisfy
/// labels[0] = 0 and labels[i] <= 1 + max(labels[..i]).
pub fn for_each_set_partition(n: usize, mut visit: impl FnMut(&[usize], usize)) {
    if n == 0 {
        visit(&[], 0);
        return;
    }
    let mut a = vec![0usize; n];
    // m[i] = max(a[..=i])
    let mut m = vec![0usize; n];
    loop {
        visit(&a, m[n - 1] + 1);
        let mut i = n - 1;
        while i > 0 && a[i] > m[i - 1] {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        a[i] += 1;
        m[i] = m[i - 1].max(a[i]);
        for j in i + 1..n {
            a[j] = 0;
            m[j] = m[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn bell_numbers() {
        let bell = [1usize, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975];
        for (n, &b) in bell.iter().enumerate() {
            let mut count = 0;
            let mut seen = HashSet::new();
            for_each_set_partition(n, |a, k| {
                count += 1;
                assert_eq!(k, a.iter().max().map_or(0, |x| x + 1));
                if n <= 7 {
                    assert!(seen.insert(a.to_vec()));
                }
            });
            assert_eq!(count, b, "n = {n}");
        }
    }
}
