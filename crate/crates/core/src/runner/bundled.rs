//! Configs shipped with the crate, addressable by name from the command line.

const BUNDLED: &[(&str, &str)] = &[
    ("count_nia_n20", include_str!("../../configs/count_nia_n20.toml")),
    ("downstream_sbm_n20", include_str!("../../configs/downstream_sbm_n20.toml")),
    ("downstream_village", include_str!("../../configs/downstream_village.toml")),
    ("etc_m_sweep_school", include_str!("../../configs/etc_m_sweep_school.toml")),
    ("etc_m_sweep_village", include_str!("../../configs/etc_m_sweep_village.toml")),
    ("head_to_head_large_xi", include_str!("../../configs/head_to_head_large_xi.toml")),
    ("head_to_head_small_xi", include_str!("../../configs/head_to_head_small_xi.toml")),
    ("k_ablation", include_str!("../../configs/k_ablation.toml")),
    ("linmeans_scaling", include_str!("../../configs/linmeans_scaling.toml")),
    ("misspec_spec_a", include_str!("../../configs/misspec_spec_a.toml")),
    ("misspec_spec_b", include_str!("../../configs/misspec_spec_b.toml")),
    ("nia_spec_a", include_str!("../../configs/nia_spec_a.toml")),
    ("nia_spec_b", include_str!("../../configs/nia_spec_b.toml")),
    ("real_network_school", include_str!("../../configs/real_network_school.toml")),
    ("real_network_village", include_str!("../../configs/real_network_village.toml")),
    ("rho_sensitivity", include_str!("../../configs/rho_sensitivity.toml")),
];

/// Names of the bundled configs, sorted.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

/// TOML text of a bundled config.
pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
