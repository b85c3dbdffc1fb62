//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

/// `C(n, k)` from Pascal's rule; no shortcuts shared with the library.
pub fn choose(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![1u64; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row[k as usize]
}

/// Smallest `b` with `2^b >= x`.
pub fn ceil_log2(x: u64) -> u64 {
    let mut b = 0;
    while (1u128 << b) < u128::from(x) {
        b += 1;
    }
    b
}

/// All `k`-subsets of `{1..=n}` in lexicographic order, by recursion.
pub fn all_subsets(n: u32, k: u32) -> Vec<Vec<u32>> {
    fn go(start: u32, n: u32, k: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k as usize {
            out.push(cur.clone());
            return;
        }
        for x in start..=n {
            cur.push(x);
            go(x + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, n, k, &mut Vec::new(), &mut out);
    out
}

/// `K/K' + ln ln K' / ln 2 + slack`, written out directly.
pub fn load_bound(balls: f64, bins: f64, slack: f64) -> f64 {
    balls / bins + bins.ln().ln() / 2f64.ln() + slack
}
