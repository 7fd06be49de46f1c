mod support;

use kanfe::features::{cross_channel_features, level2_features, segment, ChannelWiseBlock, WindowBank};
use kanfe::{FilterSpec, KanFilter};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{channel_wise_oracle, cross_channel_oracle, filter_oracle, level2_oracle};

fn random_filters(spec: &FilterSpec, count: usize, seed: u64) -> Vec<KanFilter<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut f = KanFilter::init_with(spec, &mut rng).unwrap();
            for layer in f.layers_mut() {
                for s in &mut layer.spline_scale {
                    *s = rng.random_range(0.5..1.5);
                }
            }
            f
        })
        .collect()
}

fn frame(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(0.0..1.0)).collect()
}

fn close(a: &[f64], b: &[f64]) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() < 1e-12, "index {i}: {x} vs {y}");
    }
}

#[test]
fn kan_filter_matches_edge_by_edge_evaluation() {
    let filters = random_filters(&FilterSpec::new(6), 3, 1);
    let x = frame(6 * 5, 2);
    for f in &filters {
        let y = f.eval(&x, 5).unwrap();
        for (r, yr) in y.iter().enumerate() {
            assert!((yr - filter_oracle(f, &x[r * 6..(r + 1) * 6])).abs() < 1e-12);
        }
    }
}

#[test]
fn channel_wise_block_matches_loops() {
    // c = 2, l = 3, f = 2, n_w = 4
    let (c, nw) = (2, 4);
    let x = frame(c * 3 * nw + 2, 3);
    for per_channel in [false, true] {
        let count = if per_channel { c * 2 } else { 2 };
        let filters = random_filters(&FilterSpec::new(nw), count, 4);
        let block = ChannelWiseBlock::from_filters(filters.clone(), c, per_channel).unwrap();
        let wf = segment(&x, c, nw).unwrap();
        let got = block.features(&wf).unwrap();
        // the oracle reads the cropped frame
        let t = x.len() / c;
        let cropped: Vec<f64> = (0..c).flat_map(|ch| x[ch * t..ch * t + 3 * nw].to_vec()).collect();
        close(&got, &channel_wise_oracle(&filters, &cropped, c, nw, per_channel));
    }
}

#[test]
fn cross_channel_block_matches_loops() {
    // c = 2, n_w = 4, l = 2, f_p = 3
    let (c, nw) = (2, 4);
    let x = frame(c * 2 * nw, 5);
    let filters = random_filters(&FilterSpec::new(c * nw), 3, 6);
    let bank = WindowBank::from_filters(filters.clone()).unwrap();
    let got = cross_channel_features(&bank, &segment(&x, c, nw).unwrap()).unwrap();
    close(&got, &cross_channel_oracle(&filters, &x, c, nw));
}

#[test]
fn level2_block_matches_loops() {
    // c = 2, f = 5, l = 4, f_2 = 5
    let (c, f, l) = (2, 5, 4);
    let l1 = frame(c * f * l, 7);
    let filters = random_filters(&FilterSpec::new(c * f), 5, 8);
    let bank = WindowBank::from_filters(filters.clone()).unwrap();
    close(&level2_features(&bank, &l1, c, f, l).unwrap(), &level2_oracle(&filters, &l1, c * f, l));
}

#[test]
fn swapping_channels_swaps_shared_filter_outputs() {
    let (c, nw, l, f) = (3, 5, 4, 2);
    let t = nw * l;
    let x = frame(c * t, 9);
    let block = ChannelWiseBlock::from_filters(random_filters(&FilterSpec::new(nw), f, 10), c, false).unwrap();
    let base = block.features(&segment(&x, c, nw).unwrap()).unwrap();
    let perm = [2, 0, 1];
    let swapped: Vec<f64> = perm.iter().flat_map(|&ch| x[ch * t..(ch + 1) * t].to_vec()).collect();
    let out = block.features(&segment(&swapped, c, nw).unwrap()).unwrap();
    for (dst, &src) in perm.iter().enumerate() {
        assert_eq!(&out[dst * f * l..(dst + 1) * f * l], &base[src * f * l..(src + 1) * f * l]);
    }
}

#[test]
fn permuting_windows_permutes_features() {
    let (c, nw, l) = (2, 4, 3);
    let t = nw * l;
    let x = frame(c * t, 11);
    let block = ChannelWiseBlock::from_filters(random_filters(&FilterSpec::new(nw), 2, 12), c, false).unwrap();
    let base = block.features(&segment(&x, c, nw).unwrap()).unwrap();
    // reverse the window order inside every channel
    let rev: Vec<f64> = (0..c)
        .flat_map(|ch| (0..l).rev().flat_map(move |w| (0..nw).map(move |s| ch * t + w * nw + s)))
        .map(|i| x[i])
        .collect();
    let out = block.features(&segment(&rev, c, nw).unwrap()).unwrap();
    for row in 0..c * 2 {
        for w in 0..l {
            assert_eq!(out[row * l + w], base[row * l + (l - 1 - w)]);
        }
    }
}
