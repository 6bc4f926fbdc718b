use ndarray::{array, Array2};
use spectral_spde::io::{
    read_csv_matrix, read_spte, read_station_csv, write_spte, Config, STATION_HEADER,
};
use spectral_spde::SpdeError;

#[test]
fn spte_header_is_magic_then_size_then_count() {
    let fields = Array2::from_shape_fn((3, 4), |(t, j)| (t * 4 + j) as f64 * 0.5);
    let mut bytes = Vec::new();
    write_spte(&mut bytes, 2, &fields).unwrap();
    assert_eq!(&bytes[..4], b"SPTE");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(bytes.len(), 12 + 8 * 12);
    // Row-major: the second value is field 0, cell 1.
    assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 0.5);
    let (n, back) = read_spte(&mut bytes.as_slice()).unwrap();
    assert_eq!(n, 2);
    assert_eq!(back, fields);
}

#[test]
fn spte_rejects_a_foreign_file_and_a_wrong_width() {
    let mut bytes = b"SPTX".to_vec();
    bytes.extend_from_slice(&[0; 8]);
    let err = read_spte(&mut bytes.as_slice()).unwrap_err();
    assert!(matches!(err, SpdeError::Parse { .. }), "{err}");

    let mut out = Vec::new();
    assert!(write_spte(&mut out, 3, &Array2::zeros((1, 4))).is_err());
}

#[test]
fn spte_truncated_payload_is_an_error() {
    let mut bytes = Vec::new();
    write_spte(&mut bytes, 2, &Array2::ones((2, 4))).unwrap();
    bytes.truncate(bytes.len() - 8);
    assert!(read_spte(&mut bytes.as_slice()).is_err());
}

#[test]
fn csv_matrix_reads_blank_fields_as_missing() {
    let m = read_csv_matrix("1.5,,3\n\n-2,4e-3,0\n".as_bytes()).unwrap();
    assert_eq!(m.dim(), (2, 3));
    assert!(m[[0, 1]].is_nan());
    assert_eq!(m[[1, 1]], 4e-3);

    let err = read_csv_matrix("1,2\n3\n".as_bytes()).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    let err = read_csv_matrix("1,x\n".as_bytes()).unwrap_err();
    assert!(err.to_string().contains("line 1"), "{err}");
}

#[test]
fn config_strips_comments_and_types_values() {
    let cfg = Config::parse("# header\nn = 16 # grid side\nname=abc\n\ndt = 0.25\n").unwrap();
    assert_eq!(cfg.require::<usize>("n").unwrap(), 16);
    assert_eq!(cfg.get_str("name"), Some("abc"));
    assert_eq!(cfg.get_or("dt", 1.0).unwrap(), 0.25);
    assert_eq!(cfg.get_or("steps", 9usize).unwrap(), 9);
}

#[test]
fn config_errors_name_the_line_and_key() {
    let err = Config::parse("a = 1\na = 2\n").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 2") && msg.contains('a') && msg.contains("duplicate"), "{msg}");

    let msg = Config::parse("a = 1\nnot a pair\n").unwrap_err().to_string();
    assert!(msg.contains("line 2"), "{msg}");

    let cfg = Config::parse("x = 1\ny = twelve\n").unwrap();
    let msg = cfg.require::<u32>("missing").unwrap_err().to_string();
    assert!(msg.contains("in key \"missing\"") && !msg.contains("line"), "{msg}");
    let msg = cfg.require::<u32>("y").unwrap_err().to_string();
    assert!(msg.contains("line 2") && msg.contains('y'), "{msg}");
}

#[test]
fn config_params_are_validated() {
    let base = "rho0 = 0.1\nsigma2 = 1\nzeta = 0.5\nrho1 = 0.1\ngamma = 2\npsi = 0.3\nmu_x = 0.1\nmu_y = -0.1\n";
    let ok = Config::parse(&format!("{base}tau2 = 0.01\n")).unwrap();
    let p = ok.params().unwrap();
    assert_eq!(p.mu, [0.1, -0.1]);
    let bad = Config::parse(&format!("{base}tau2 = -1\n")).unwrap();
    assert!(bad.params().is_err());
}

fn station_csv(rows: &[&str]) -> String {
    let mut s = STATION_HEADER.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

#[test]
fn station_table_fills_absent_rows_with_missing() {
    let text = station_csv(&[
        "0,a,0.1,0.2,1.5,2.0",
        "0,b,0.5,0.5,0,",
        "2,a,0.1,0.2,,0.7",
    ]);
    let t = read_station_csv(text.as_bytes()).unwrap();
    assert_eq!(t.station_ids, ["a", "b"]);
    assert_eq!(t.coords, [[0.1, 0.2], [0.5, 0.5]]);
    assert_eq!(t.rain.dim(), (3, 2));
    assert_eq!(t.rain[[0, 0]], 1.5);
    assert!(t.nwp[[0, 1]].is_nan());
    assert!(t.rain[[1, 0]].is_nan() && t.rain[[1, 1]].is_nan());
    assert!(t.rain[[2, 0]].is_nan());
    assert_eq!(t.nwp[[2, 0]], 0.7);
    assert_eq!(t.rain.row(0).to_owned(), array![1.5, 0.0]);
}

#[test]
fn station_table_rejects_moving_stations_and_missing_columns() {
    let moved = station_csv(&["0,a,0.1,0.2,1,1", "1,a,0.3,0.2,1,1"]);
    let msg = read_station_csv(moved.as_bytes()).unwrap_err().to_string();
    assert!(msg.contains("moved") && msg.contains("line 3"), "{msg}");

    let short = "time_index,station_id,x,y,rain_mm\n0,a,0,0,1\n";
    let msg = read_station_csv(short.as_bytes()).unwrap_err().to_string();
    assert!(msg.contains("nwp_mm"), "{msg}");

    assert!(read_station_csv(station_csv(&[]).as_bytes()).is_err());
}
