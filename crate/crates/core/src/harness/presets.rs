//! Named experiments.
//!
//! The information-transfer presets run on a 15x15 lattice with the leader
//! one cell in from the corner (row 1, col 1); see the README for why.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use super::config::{ExperimentConfig, ExperimentKind, LeaderSpec, TopologySpec};
use crate::topology::DiscSampling;

pub const LATTICE_SIDE: usize = 15;
pub const LEADER_ROW: usize = 1;
pub const LEADER_COL: usize = 1;
pub const DEFAULT_SEED: u64 = 1;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> ExperimentConfig,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        (self.build)()
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig1b",
        description: "lattice step response without DSR (beta = 0)",
        build: fig1b,
    },
    Preset {
        name: "fig1c",
        description: "lattice step response with DSR, beta = 0.96",
        build: fig1c,
    },
    Preset {
        name: "fig1d",
        description: "lattice step response with DSR, beta = 0.98 (overshoot)",
        build: fig1d,
    },
    Preset {
        name: "fig1_unstable",
        description: "beta = 0 with Ks = 101: past the stability limit, diverges",
        build: fig1_unstable,
    },
    Preset {
        name: "fig1_stability_sweep",
        description: "beta = 0 stability verdicts for Ks around the limit",
        build: fig1_stability_sweep,
    },
    Preset {
        name: "fig2_lattice",
        description: "lattice flock turn maneuver with DSR, beta = 0.96",
        build: fig2_lattice,
    },
    Preset {
        name: "fig2_lattice_no_dsr",
        description: "lattice flock turn maneuver without DSR",
        build: fig2_lattice_no_dsr,
    },
    Preset {
        name: "fig2_lattice_noise",
        description: "lattice flock turn with DSR and 0.025 rad update noise",
        build: fig2_lattice_noise,
    },
    Preset {
        name: "fig2_disc_noise",
        description: "random-disc flock turn with DSR and 0.025 rad update noise",
        build: fig2_disc_noise,
    },
    Preset {
        name: "fig3a_diffusion",
        description: "diffusion model, Ks = 4011, dt = 2.49e-4 s",
        build: fig3a_diffusion,
    },
    Preset {
        name: "fig3b_second_order",
        description: "second-order continuum model, integrator step 1.246e-4 s",
        build: fig3b_second_order,
    },
    Preset {
        name: "fig3b_unstable",
        description: "second-order continuum model, integrator step 2.493e-4 s: diverges",
        build: fig3b_unstable,
    },
];

pub fn find_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

fn lattice_base(kind: ExperimentKind, name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.to_string()),
        kind,
        topology: TopologySpec::Lattice {
            rows: LATTICE_SIDE,
            cols: LATTICE_SIDE,
            spacing: 1.0,
        },
        leader: LeaderSpec::Cell {
            row: LEADER_ROW,
            col: LEADER_COL,
        },
        sensing_radius: 1.2,
        ks: 100.0,
        beta: 0.0,
        dt: 0.01,
        noise: 0.0,
        source_initial: 0.0,
        source_final: 1.0,
        switch_step: 0,
        initial_value: 0.0,
        speed: None,
        integrator_dt: None,
        ks_values: Vec::new(),
        n_steps: 1000,
        seed: Some(DEFAULT_SEED),
        csv_stride: 1,
        band: 0.02,
        threshold: 0.1,
        near_fraction: 1.0 / 3.0,
        expect_divergence: false,
        confirm_settling: true,
    }
}

fn fig1b() -> ExperimentConfig {
    ExperimentConfig {
        n_steps: 12_000,
        csv_stride: 10,
        ..lattice_base(ExperimentKind::LatticeInfo, "fig1b")
    }
}

fn fig1c() -> ExperimentConfig {
    ExperimentConfig {
        beta: 0.96,
        n_steps: 600,
        ..lattice_base(ExperimentKind::LatticeInfo, "fig1c")
    }
}

fn fig1d() -> ExperimentConfig {
    ExperimentConfig {
        beta: 0.98,
        n_steps: 800,
        ..lattice_base(ExperimentKind::LatticeInfo, "fig1d")
    }
}

fn fig1_unstable() -> ExperimentConfig {
    ExperimentConfig {
        ks: 101.0,
        n_steps: 3000,
        expect_divergence: true,
        ..lattice_base(ExperimentKind::LatticeInfo, "fig1_unstable")
    }
}

fn fig1_stability_sweep() -> ExperimentConfig {
    ExperimentConfig {
        ks_values: vec![50.0, 99.0, 100.0, 101.0, 110.0],
        n_steps: 3000,
        ..lattice_base(ExperimentKind::StabilitySweep, "fig1_stability_sweep")
    }
}

fn flock_base(name: &str, beta: f64) -> ExperimentConfig {
    ExperimentConfig {
        beta,
        speed: Some(1.0),
        source_initial: -FRAC_PI_4,
        source_final: FRAC_PI_2,
        initial_value: -FRAC_PI_4,
        n_steps: 400,
        confirm_settling: false,
        ..lattice_base(ExperimentKind::Flocking, name)
    }
}

fn fig2_lattice() -> ExperimentConfig {
    flock_base("fig2_lattice", 0.96)
}

fn fig2_lattice_no_dsr() -> ExperimentConfig {
    flock_base("fig2_lattice_no_dsr", 0.0)
}

fn fig2_lattice_noise() -> ExperimentConfig {
    ExperimentConfig {
        noise: 0.025,
        ..flock_base("fig2_lattice_noise", 0.96)
    }
}

fn fig2_disc_noise() -> ExperimentConfig {
    ExperimentConfig {
        topology: TopologySpec::Disc {
            n_agents: LATTICE_SIDE * LATTICE_SIDE,
            disc_radius: 25.0 / 3.0,
            sampling: DiscSampling::UniformArea,
        },
        // trailing edge of the flock, like the lattice corner
        leader: LeaderSpec::Near { x: -5.0, y: -5.0 },
        noise: 0.025,
        ..flock_base("fig2_disc_noise", 0.96)
    }
}

fn fig3a_diffusion() -> ExperimentConfig {
    ExperimentConfig {
        ks: 4011.0,
        dt: 2.49e-4,
        n_steps: 12_000,
        csv_stride: 10,
        ..lattice_base(ExperimentKind::ContinuumDiffusion, "fig3a_diffusion")
    }
}

fn fig3b_second_order() -> ExperimentConfig {
    ExperimentConfig {
        beta: 0.96,
        integrator_dt: Some(1.246e-4),
        n_steps: 24_000,
        csv_stride: 10,
        ..lattice_base(ExperimentKind::ContinuumSecondOrder, "fig3b_second_order")
    }
}

fn fig3b_unstable() -> ExperimentConfig {
    // the instability needs ~40 s of model time to surface
    ExperimentConfig {
        integrator_dt: Some(2.493e-4),
        n_steps: 401_000,
        csv_stride: 1000,
        expect_divergence: true,
        confirm_settling: false,
        ..fig3b_second_order()
    }
    .renamed("fig3b_unstable")
}

impl ExperimentConfig {
    fn renamed(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }
}
