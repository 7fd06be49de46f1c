//! The fifteen reference architectures and their command-line names.

use crate::nn::CONV_KERNEL;

use super::config::{ModelConfig, Variant, DEFAULT_NW};

pub const TABLE1_NAMES: [&str; 15] = [
    "CNN-Enc1",
    "CNN-Enc2",
    "CNN-Enc3",
    "CNN-Enc4",
    "1L-KAN-FE",
    "2L-KAN-FE_5F",
    "2L-KAN-FE_10F",
    "2L-KAN-FE_15F",
    "2L-KAN-FE_20F",
    "RL-KAN-FE",
    "PL-KAN-FE_5F",
    "PL-KAN-FE_10F",
    "KAN-CNN-Enc0",
    "KAN-CNN-Enc1",
    "KAN-CNN-Enc2",
];

/// All rows for one input shape, with the default window `n_w = 10`.
///
/// Hybrid rows run their conv stack over the window axis; when `frame_len /
/// n_w` leaves too few windows for the stack, their `n_w` is reduced to the
/// largest value that keeps every conv layer at least one step long.
pub fn enumerate_table1(class_count: usize, channels: usize, frame_len: usize) -> Vec<ModelConfig> {
    let (c, t, k) = (channels, frame_len, class_count);
    let mut rows = vec![
        ModelConfig::cnn("CNN-Enc1", &[32, 64, 128], c, t, k),
        ModelConfig::cnn("CNN-Enc2", &[16, 32, 64], c, t, k),
        ModelConfig::cnn("CNN-Enc3", &[8, 16, 32], c, t, k),
        ModelConfig::cnn("CNN-Enc4", &[8, 8, 8], c, t, k),
        ModelConfig::one_level("1L-KAN-FE", 5, c, t, k),
        ModelConfig::two_level("2L-KAN-FE_5F", 5, 5, c, t, k),
        ModelConfig::two_level("2L-KAN-FE_10F", 5, 10, c, t, k),
        ModelConfig::two_level("2L-KAN-FE_15F", 5, 15, c, t, k),
        ModelConfig::two_level("2L-KAN-FE_20F", 5, 20, c, t, k),
        ModelConfig::residual("RL-KAN-FE", 5, 10, c, t, k),
        ModelConfig::parallel("PL-KAN-FE_5F", 5, 5, c, t, k),
        ModelConfig::parallel("PL-KAN-FE_10F", 10, 10, c, t, k),
        ModelConfig::kan_cnn("KAN-CNN-Enc0", 5, &[5], c, t, k),
        ModelConfig::kan_cnn("KAN-CNN-Enc1", 5, &[32, 64, 128], c, t, k),
        ModelConfig::kan_cnn("KAN-CNN-Enc2", 5, &[16, 32, 64], c, t, k),
    ];
    for row in &mut rows {
        fit_hybrid_window(row, DEFAULT_NW);
    }
    rows
}

/// Sets `n_w` for every row, re-applying the hybrid window rule.
pub fn with_window(mut rows: Vec<ModelConfig>, n_w: usize) -> Vec<ModelConfig> {
    for row in &mut rows {
        row.n_w = n_w;
        fit_hybrid_window(row, n_w);
    }
    rows
}

fn fit_hybrid_window(row: &mut ModelConfig, preferred: usize) {
    if row.variant != Variant::KanCnn {
        return;
    }
    let need = 1 + row.conv_channels.len() * (CONV_KERNEL - 1);
    let largest = row.frame_len / need;
    row.n_w = if largest == 0 { preferred } else { preferred.min(largest) };
}

fn normalize(name: &str) -> String {
    name.trim().to_ascii_uppercase().replace(' ', "-").replace("-FE", "")
}

/// Resolves a user-supplied model name (case-insensitive; the `-FE` suffix
/// may be omitted, e.g. `1L-KAN` or `2L-KAN_10F`).
pub fn canonical_name(name: &str) -> Option<&'static str> {
    let wanted = normalize(name);
    TABLE1_NAMES.iter().copied().find(|n| normalize(n) == wanted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_rows_with_unique_names() {
        let rows = enumerate_table1(6, 3, 80);
        assert_eq!(rows.len(), 15);
        let names: Vec<_> = rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, TABLE1_NAMES.to_vec());
    }

    #[test]
    fn row_contents() {
        let rows = enumerate_table1(6, 3, 80);
        let get = |n: &str| rows.iter().find(|r| r.name == n).unwrap();
        assert_eq!((get("2L-KAN-FE_15F").f, get("2L-KAN-FE_15F").f2), (Some(5), Some(15)));
        assert_eq!(get("CNN-Enc4").conv_channels, vec![8, 8, 8]);
        assert_eq!(get("CNN-Enc1").conv_channels, vec![32, 64, 128]);
        assert_eq!((get("PL-KAN-FE_10F").f, get("PL-KAN-FE_10F").fp), (Some(10), Some(10)));
        assert_eq!((get("RL-KAN-FE").f, get("RL-KAN-FE").f2), (Some(5), Some(10)));
        assert_eq!(get("KAN-CNN-Enc0").conv_channels, vec![5]);
        for r in &rows {
            r.validate().unwrap_or_else(|e| panic!("{}: {e}", r.name));
        }
    }

    #[test]
    fn hybrid_window_rule() {
        let rows = enumerate_table1(6, 3, 80);
        let get = |n: &str| rows.iter().find(|r| r.name == n).unwrap();
        assert_eq!(get("KAN-CNN-Enc0").n_w, 10);
        assert_eq!(get("KAN-CNN-Enc1").n_w, 6);
        assert_eq!(get("KAN-CNN-Enc1").windows(), 13);
        assert_eq!(get("1L-KAN-FE").n_w, 10);
        let rows = enumerate_table1(13, 39, 200);
        assert!(rows.iter().all(|r| r.n_w == 10));
    }

    #[test]
    fn name_aliases() {
        assert_eq!(canonical_name("1L-KAN"), Some("1L-KAN-FE"));
        assert_eq!(canonical_name("2l-kan-fe_10f"), Some("2L-KAN-FE_10F"));
        assert_eq!(canonical_name("2L-KAN FE_10F"), Some("2L-KAN-FE_10F"));
        assert_eq!(canonical_name("CNN-Enc4"), Some("CNN-Enc4"));
        assert_eq!(canonical_name("KAN-CNN-Enc2"), Some("KAN-CNN-Enc2"));
        assert_eq!(canonical_name("CNN-Enc9"), None);
    }
}
