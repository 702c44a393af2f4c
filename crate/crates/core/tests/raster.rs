use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zeroflood::raster::{
    decode_zfr, read_ascii_grid, read_binary_raster, read_window, write_ascii_grid, write_binary_raster,
    BoundingBox, GeoTransform, RasterData, RasterGrid,
};
use zeroflood::sampling::{extract_coordinates, read_metadata_csv};
use zeroflood::Error;

fn distinct(width: usize, height: usize, t: GeoTransform) -> RasterGrid {
    RasterGrid::continuous(width, height, t, "EPSG:4326", -9999.0, (0..width * height).map(|v| v as f32).collect())
        .unwrap()
}

#[test]
fn random_64x64_survives_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = GeoTransform::new(10.5, -20.25, 0.5, 0.25).unwrap();
    let values: Vec<f32> = (0..64 * 64).map(|_| rng.gen_range(-1e6..1e6)).collect();
    let r = RasterGrid::continuous(64, 64, t, "EPSG:3035", f32::NAN, values).unwrap();
    let path = dir.path().join("r.zfr");
    write_binary_raster(&r, &path).unwrap();
    let back = read_binary_raster(&path).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.transform(), r.transform());
    assert_eq!(back.crs_id(), "EPSG:3035");
    assert!(back.nodata().is_nan());
}

#[test]
fn empty_file_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.zfr");
    std::fs::write(&path, b"").unwrap();
    assert!(matches!(read_binary_raster(&path).unwrap_err(), Error::Format(_)));
}

#[test]
fn ascii_grid_examples() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.asc");
    std::fs::write(&small, "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\n1 0\n0 2\n").unwrap();
    let r = read_ascii_grid(&small).unwrap();
    assert_eq!((r.width(), r.height()), (2, 2));
    assert_eq!(r.as_continuous().unwrap(), &[1.0, 0.0, 0.0, 2.0]);
    assert_eq!(r.transform().origin_y, 20.0);

    let short = dir.path().join("short.asc");
    std::fs::write(&short, "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3 4 5 6 7 8\n").unwrap();
    assert!(matches!(read_ascii_grid(&short).unwrap_err(), Error::Truncated { expected: 9, actual: 8 }));

    let holes = dir.path().join("holes.asc");
    std::fs::write(
        &holes,
        "ncols 3\nnrows 2\nxllcorner 100\nyllcorner 200\ncellsize 5\nNODATA_value -9999\n1 -9999 3\n4 5 6\n",
    )
    .unwrap();
    let r = read_ascii_grid(&holes).unwrap();
    assert!(r.is_nodata(1, 0));
    assert!(!r.is_nodata(0, 0));
    let again = dir.path().join("again.asc");
    write_ascii_grid(&r, &again).unwrap();
    assert_eq!(read_ascii_grid(&again).unwrap(), r);
}

#[test]
fn metadata_csv_of_ten_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("meta.csv");
    let mut text = String::from("key,center_x,center_y,notes\n");
    for i in 0..10 {
        text.push_str(&format!("tile{i},{},{},x\n", 1000.0 + 32.5 * i as f64, -200.0 - i as f64));
    }
    std::fs::write(&path, text).unwrap();
    let metas = extract_coordinates(&read_metadata_csv(&path).unwrap(), 320.0).unwrap();
    assert_eq!(metas.len(), 10);
    assert_eq!(metas[3].key, "tile3");
    assert_eq!((metas[3].center_x, metas[3].center_y), (1097.5, -203.0));
    assert!(metas.iter().all(|m| m.tile_side == 320.0));
}

fn arb_transform() -> impl Strategy<Value = GeoTransform> {
    (-1e5f64..1e5, -1e5f64..1e5, 0.1f64..100.0, 0.1f64..100.0)
        .prop_map(|(x, y, w, h)| GeoTransform::new(x, y, w, h).unwrap())
}

proptest! {
    #[test]
    fn pixel_center_maps_back(t in arb_transform(), c in 0i64..5000, r in 0i64..5000) {
        let (x, y) = t.pixel_center(c, r);
        prop_assert_eq!(t.world_to_pixel(x, y), (c, r));
    }

    #[test]
    fn quadrants_reassemble(w in 2usize..12, h in 2usize..12, t in arb_transform()) {
        let r = distinct(w, h, t);
        let (cw, ch) = (w / 2, h / 2);
        let e = r.extent();
        let xs = [e.min_x, t.origin_x + cw as f64 * t.pixel_w, e.max_x];
        let ys = [e.max_y, t.origin_y - ch as f64 * t.pixel_h, e.min_y];
        let mut rebuilt = vec![f32::NAN; w * h];
        for qy in 0..2 {
            for qx in 0..2 {
                let bbox = BoundingBox::new(xs[qx], ys[qy + 1], xs[qx + 1], ys[qy]).unwrap();
                let win = read_window(&r, &bbox).unwrap();
                let (c0, r0) = (qx * cw, qy * ch);
                prop_assert_eq!(win.transform().origin_x, t.pixel_to_world(c0 as i64, r0 as i64).0);
                for rr in 0..win.height() {
                    for cc in 0..win.width() {
                        rebuilt[(r0 + rr) * w + c0 + cc] = win.get(cc, rr);
                    }
                }
            }
        }
        prop_assert_eq!(&rebuilt[..], r.as_continuous().unwrap());
    }

    #[test]
    fn windows_never_invent_valid_values(
        seed in any::<u64>(),
        bx in -5i64..10, by in -5i64..10, bw in 1i64..10, bh in 1i64..10,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = GeoTransform::new(0.0, 80.0, 10.0, 10.0).unwrap();
        let codes: Vec<u8> = (0..64).map(|_| [0, 1, 2, 255][rng.gen_range(0..4)]).collect();
        let r = RasterGrid::categorical(8, 8, t, "", 255, codes).unwrap();
        let bbox = BoundingBox::new(
            (bx * 10) as f64,
            80.0 - ((by + bh) * 10) as f64,
            ((bx + bw) * 10) as f64,
            80.0 - (by * 10) as f64,
        ).unwrap();
        match read_window(&r, &bbox) {
            Err(Error::EmptyWindow) => {
                prop_assert!(bx + bw <= 0 || bx >= 8 || by + bh <= 0 || by >= 8);
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
            Ok(win) => {
                for row in 0..win.height() {
                    for col in 0..win.width() {
                        let (sc, sr) = (bx + col as i64, by + row as i64);
                        let inside = (0..8).contains(&sc) && (0..8).contains(&sr);
                        if !inside || r.is_nodata(sc as usize, sr as usize) {
                            prop_assert!(win.is_nodata(col, row));
                        } else {
                            prop_assert_eq!(win.get(col, row), r.get(sc as usize, sr as usize));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn categorical_round_trip(codes in prop::collection::vec(prop::sample::select(vec![0u8, 1, 2, 9]), 1..200), crs in "[A-Z:0-9]{0,12}") {
        let n = codes.len();
        let t = GeoTransform::new(1.0, 2.0, 3.0, 4.0).unwrap();
        let r = RasterGrid::categorical(n, 1, t, crs, 9, codes).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.zfr");
        write_binary_raster(&r, &path).unwrap();
        let back = read_binary_raster(&path).unwrap();
        prop_assert!(matches!(back.data(), RasterData::Categorical(_)));
        prop_assert_eq!(back, r);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_zfr(&bytes);
        let mut with_magic = b"ZFR1".to_vec();
        with_magic.extend_from_slice(&bytes);
        let _ = decode_zfr(&with_magic);
    }
}
