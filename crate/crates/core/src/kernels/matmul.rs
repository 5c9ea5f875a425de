//! Register-tiled matrix multiply: C = A*B, int32. Each tile covers one
//! output row and two column strips so a single stride-0 broadcast of
//! A[i][k] feeds two vmacc accumulators.

use super::{
    align_up, data_directives, i32_bytes, parse_kernel, rand_i32_small, KernelCase, KernelError,
};
use crate::config::ValidatedConfig;

/// Scalar reference: wrapping int32 triple loop.
pub fn golden_matmul(m: usize, k: usize, n: usize, a: &[i32], b: &[i32]) -> Vec<i32> {
    let mut c = vec![0i32; m * n];
    for i in 0..m {
        for kk in 0..k {
            let aik = a[i * k + kk];
            for j in 0..n {
                c[i * n + j] = c[i * n + j].wrapping_add(aik.wrapping_mul(b[kk * n + j]));
            }
        }
    }
    c
}

pub fn build_matmul_tiled(
    cfg: &ValidatedConfig,
    m: usize,
    k: usize,
    n: usize,
    seed: u64,
) -> Result<KernelCase, KernelError> {
    let mut s = seed;
    let a: Vec<i32> = (0..m * k).map(|_| rand_i32_small(&mut s)).collect();
    let b: Vec<i32> = (0..k * n).map(|_| rand_i32_small(&mut s)).collect();
    build_matmul_tiled_with(cfg, m, k, n, a, b)
}

pub fn build_matmul_tiled_with(
    cfg: &ValidatedConfig,
    m: usize,
    k: usize,
    n: usize,
    a: Vec<i32>,
    b: Vec<i32>,
) -> Result<KernelCase, KernelError> {
    let epv = cfg.elems_per_vec();
    if m == 0 || k == 0 || n == 0 || n % (2 * epv) != 0 {
        return Err(KernelError::BadDims(format!(
            "matmul ({m}x{k})x({k}x{n}): n must be a positive multiple of {}",
            2 * epv
        )));
    }
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);

    let a_base = 0x1000;
    let b_base = align_up(a_base + m * k * 4, 256);
    let c_base = align_up(b_base + k * n * 4, 256);

    let mut src = String::new();
    src.push_str("# matmul_tiled: C = A*B, int32, 1-row x 2-strip tiles\n");
    src.push_str(&data_directives(a_base, &i32_bytes(&a)));
    src.push_str(&data_directives(b_base, &i32_bytes(&b)));
    src.push_str(&format!(
        "\
li a0, {a_base}
li a1, {b_base}
li a2, {c_base}
li s0, 0
i_loop:
li s1, 0
j_loop:
li t0, {epv}
vsetvli x0, t0, e32
vmv.v.x v3, x0
vmv.v.x v4, x0
li t2, {a_row_bytes}
mul t3, s0, t2
add t3, a0, t3
slli t5, s1, 2
add t5, a1, t5
li s2, 0
k_loop:
vlse32.v v2, (t3), x0
vle32.v v1, (t5)
vmacc.vv v3, v2, v1
addi t6, t5, {vlen_bytes}
vle32.v v1, (t6)
vmacc.vv v4, v2, v1
addi t3, t3, 4
addi t5, t5, {b_row_bytes}
addi s2, s2, 1
li t6, {k}
blt s2, t6, k_loop
li t6, {n}
mul t0, s0, t6
add t0, t0, s1
slli t0, t0, 2
add t0, a2, t0
vse32.v v3, (t0)
addi t0, t0, {vlen_bytes}
vse32.v v4, (t0)
addi s1, s1, {tile_cols}
li t0, {n}
blt s1, t0, j_loop
addi s0, s0, 1
li t0, {m}
blt s0, t0, i_loop
halt
",
        a_row_bytes = k * 4,
        b_row_bytes = n * 4,
        vlen_bytes = cfg.vlen_bytes(),
        tile_cols = 2 * epv,
    ));

    let golden = i32_bytes(&golden_matmul(m, k, n, &a, &b));
    let program = parse_kernel("matmul_tiled", &src);
    Ok(KernelCase {
        name: "matmul_tiled".to_string(),
        source: src,
        program,
        golden,
        output_addr: c_base,
        problem_size: format!("({m} x {k}) x ({k} x {n})"),
        expected_active_registers: 3..=6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::analyze_registers;
    use crate::config::MachineConfig;
    use crate::pipeline::run;

    fn cfg() -> ValidatedConfig {
        MachineConfig::default().validate().unwrap()
    }

    #[test]
    fn identity_b_returns_a() {
        let cfg = cfg();
        let (m, k, n) = (4, 16, 16);
        let a: Vec<i32> = (0..m * k).map(|i| i as i32 - 11).collect();
        let mut b = vec![0i32; k * n];
        for i in 0..k.min(n) {
            b[i * n + i] = 1;
        }
        let kc = build_matmul_tiled_with(&cfg, m, k, n, a.clone(), b).unwrap();
        let out = run(&kc.program, &cfg, &[], 10_000_000).unwrap();
        assert_eq!(kc.output_of(&out.memory), i32_bytes(&a).as_slice());
    }

    #[test]
    fn random_case_matches_the_triple_loop() {
        let cfg = cfg();
        let kc = build_matmul_tiled(&cfg, 16, 64, 32, 3).unwrap();
        let out = run(&kc.program, &cfg, &[], 10_000_000).unwrap();
        assert_eq!(kc.output_of(&out.memory), kc.golden.as_slice());
    }

    #[test]
    fn register_budget_is_on_target() {
        let cfg = cfg();
        let kc = build_matmul_tiled(&cfg, 16, 64, 32, 3).unwrap();
        let r = analyze_registers(&kc.program);
        assert_eq!(r.active_registers, 4);
        assert!(kc.expected_active_registers.contains(&r.active_registers));
    }

    #[test]
    fn bad_dimensions_are_rejected() {
        let cfg = cfg();
        assert!(matches!(
            build_matmul_tiled(&cfg, 16, 64, 24, 1),
            Err(KernelError::BadDims(_))
        ));
        assert!(matches!(
            build_matmul_tiled(&cfg, 16, 64, 0, 1),
            Err(KernelError::BadDims(_))
        ));
    }
}
