use patternforge::squish::{complexity, decode, encode, extract_scan_lines, SquishPattern};
use patternforge::PatternGrid;
use proptest::prelude::*;

fn grid_strategy(max: usize) -> impl Strategy<Value = PatternGrid> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(prop_oneof![3 => Just(0u8), 1 => Just(1u8)], w * h)
            .prop_map(move |px| PatternGrid::from_pixels(w, h, px, 4).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decode_inverts_encode(g in grid_strategy(48)) {
        let sq = encode(&g);
        prop_assert!(sq.topology.is_minimal());
        prop_assert_eq!(sq.physical_width(), g.width() as u64 * 4);
        prop_assert_eq!(sq.physical_height(), g.height() as u64 * 4);
        prop_assert_eq!(decode(&sq, 4).unwrap(), g);
    }

    #[test]
    fn complexity_ignores_upsampling(g in grid_strategy(16), s in 1usize..4) {
        let g = g.with_pitch(12).unwrap();
        let up = g.upsample(s).unwrap();
        let a = encode(&g);
        let b = encode(&up);
        prop_assert_eq!(complexity(&a), complexity(&b));
        prop_assert_eq!(&a.topology, &b.topology);
        prop_assert_eq!(a.delta_x, b.delta_x);
    }

    #[test]
    fn json_round_trip(g in grid_strategy(20)) {
        let sq = encode(&g);
        let text = serde_json::to_string(&sq).unwrap();
        prop_assert!(text.contains("delta_x_nm"));
        let back: SquishPattern = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, sq);
    }
}

#[test]
fn scan_lines_count_complexity() {
    let g = PatternGrid::from_rows(&[[0, 1, 1, 0], [0, 1, 1, 0], [0, 0, 0, 0]]);
    let lines = extract_scan_lines(&g);
    let c = complexity(&encode(&g));
    assert_eq!(c.cx + 1, lines.xs.len());
    assert_eq!(c.cy + 1, lines.ys.len());
    assert_eq!((c.cx, c.cy), (3, 2));
}

#[test]
fn decode_rejects_off_pitch_deltas() {
    let g = PatternGrid::from_rows(&[[1, 0]]);
    let mut sq = encode(&g);
    sq.delta_x[0] = 3;
    assert!(decode(&sq, 2).is_err());
}
