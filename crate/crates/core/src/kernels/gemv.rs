//! Matrix-vector product kernel: y = A*x, row-major int32, two rows per
//! iteration with per-lane accumulators reduced at the end of each row.

use super::{
    align_up, data_directives, i32_bytes, parse_kernel, rand_i32_small, KernelCase, KernelError,
};
use crate::config::ValidatedConfig;

/// Scalar reference: wrapping int32 dot products.
pub fn golden_gemv(m: usize, n: usize, a: &[i32], x: &[i32]) -> Vec<i32> {
    (0..m)
        .map(|i| {
            let mut acc = 0i32;
            for k in 0..n {
                acc = acc.wrapping_add(a[i * n + k].wrapping_mul(x[k]));
            }
            acc
        })
        .collect()
}

pub fn build_gemv(
    cfg: &ValidatedConfig,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<KernelCase, KernelError> {
    let mut s = seed;
    let a: Vec<i32> = (0..m * n).map(|_| rand_i32_small(&mut s)).collect();
    let x: Vec<i32> = (0..n).map(|_| rand_i32_small(&mut s)).collect();
    build_gemv_with(cfg, m, n, a, x)
}

pub fn build_gemv_with(
    cfg: &ValidatedConfig,
    m: usize,
    n: usize,
    a: Vec<i32>,
    x: Vec<i32>,
) -> Result<KernelCase, KernelError> {
    let epv = cfg.elems_per_vec();
    if m == 0 || n == 0 || m % epv != 0 || n % epv != 0 {
        return Err(KernelError::BadDims(format!(
            "gemv {m}x{n}: dimensions must be positive multiples of {epv}"
        )));
    }
    if m % 2 != 0 {
        return Err(KernelError::BadDims(format!(
            "gemv {m}x{n}: row count must be even (two rows per iteration)"
        )));
    }
    assert_eq!(a.len(), m * n);
    assert_eq!(x.len(), n);

    let a_base = 0x1000;
    let x_base = align_up(a_base + m * n * 4, 256);
    let y_base = align_up(x_base + n * 4, 256);

    let mut src = String::new();
    src.push_str("# gemv: y = A*x, int32, two rows per pass\n");
    src.push_str(&data_directives(a_base, &i32_bytes(&a)));
    src.push_str(&data_directives(x_base, &i32_bytes(&x)));
    src.push_str(&format!(
        "\
li a0, {a_base}
li a1, {x_base}
li a2, {y_base}
li a3, {m}
li a4, {n}
li t6, {row_bytes}
li s0, 0
row_loop:
mul t0, s0, t6
add a5, a0, t0
add a6, a5, t6
addi t3, a1, 0
li t2, 0
vsetvli t4, a4, e32
vmv.v.x v4, x0
vmv.v.x v5, x0
k_loop:
vle32.v v1, (t3)
vle32.v v2, (a5)
vle32.v v3, (a6)
vmacc.vv v4, v1, v2
vmacc.vv v5, v1, v3
slli t5, t4, 2
add t3, t3, t5
add a5, a5, t5
add a6, a6, t5
add t2, t2, t4
blt t2, a4, k_loop
vmv.v.x v6, x0
vredsum.vs v7, v4, v6
vredsum.vs v8, v5, v6
slli t0, s0, 2
add t0, a2, t0
li t5, 1
vsetvli x0, t5, e32
vse32.v v7, (t0)
addi t0, t0, 4
vse32.v v8, (t0)
addi s0, s0, 2
blt s0, a3, row_loop
halt
",
        row_bytes = n * 4,
    ));

    let golden = i32_bytes(&golden_gemv(m, n, &a, &x));
    let program = parse_kernel("gemv", &src);
    Ok(KernelCase {
        name: "gemv".to_string(),
        source: src,
        program,
        golden,
        output_addr: y_base,
        problem_size: format!("({m} x {n}) x {n}"),
        expected_active_registers: 7..=11,
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
    fn identity_matrix_returns_the_input_vector() {
        let cfg = cfg();
        let n = 8;
        let mut a = vec![0i32; n * n];
        for i in 0..n {
            a[i * n + i] = 1;
        }
        let x: Vec<i32> = (0..n as i32).map(|i| 3 * i - 5).collect();
        let k = build_gemv_with(&cfg, n, n, a, x.clone()).unwrap();
        let out = run(&k.program, &cfg, &[], 1_000_000).unwrap();
        assert_eq!(k.output_of(&out.memory), i32_bytes(&x).as_slice());
    }

    #[test]
    fn random_case_matches_the_golden_dot_products() {
        let cfg = cfg();
        let k = build_gemv(&cfg, 64, 64, 7).unwrap();
        let out = run(&k.program, &cfg, &[], 10_000_000).unwrap();
        assert_eq!(k.output_of(&out.memory), k.golden.as_slice());
    }

    #[test]
    fn register_budget_is_on_target() {
        let cfg = cfg();
        let k = build_gemv(&cfg, 64, 64, 7).unwrap();
        let r = analyze_registers(&k.program);
        assert_eq!(r.active_registers, 8);
        assert!(k.expected_active_registers.contains(&r.active_registers));
    }

    #[test]
    fn bad_dimensions_are_rejected() {
        let cfg = cfg();
        assert!(matches!(
            build_gemv(&cfg, 63, 64, 1),
            Err(KernelError::BadDims(_))
        ));
        assert!(matches!(
            build_gemv(&cfg, 64, 12, 1),
            Err(KernelError::BadDims(_))
        ));
    }
}
