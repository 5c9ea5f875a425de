//! Direct 2-D convolution with a fully unrolled filter window. Each filter
//! row gets its own broadcast/input register pair (v2..v8 and v9..v15),
//! grouping accesses so the working set stays small tap to tap while the
//! static register budget deliberately exceeds a size-8 compact VRF.

use super::{
    align_up, data_directives, i32_bytes, parse_kernel, rand_i32_small, KernelCase, KernelError,
};
use crate::config::ValidatedConfig;
use std::fmt::Write as _;

/// Scalar reference: valid (no-padding) wrapping int32 convolution laid
/// out in a `rows x cols` buffer; cells outside the valid region stay 0.
pub fn golden_conv2d(rows: usize, cols: usize, fsize: usize, input: &[i32], f: &[i32]) -> Vec<i32> {
    let oh = rows - fsize + 1;
    let ow = cols - fsize + 1;
    let mut out = vec![0i32; rows * cols];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0i32;
            for dr in 0..fsize {
                for dc in 0..fsize {
                    acc = acc.wrapping_add(
                        input[(r + dr) * cols + c + dc].wrapping_mul(f[dr * fsize + dc]),
                    );
                }
            }
            out[r * cols + c] = acc;
        }
    }
    out
}

pub fn build_conv2d(
    cfg: &ValidatedConfig,
    rows: usize,
    cols: usize,
    fsize: usize,
    seed: u64,
) -> Result<KernelCase, KernelError> {
    let mut s = seed;
    let input: Vec<i32> = (0..rows * cols).map(|_| rand_i32_small(&mut s)).collect();
    let f: Vec<i32> = (0..fsize * fsize).map(|_| rand_i32_small(&mut s)).collect();
    build_conv2d_with(cfg, rows, cols, fsize, input, f)
}

pub fn build_conv2d_with(
    cfg: &ValidatedConfig,
    rows: usize,
    cols: usize,
    fsize: usize,
    input: Vec<i32>,
    f: Vec<i32>,
) -> Result<KernelCase, KernelError> {
    if fsize % 2 == 0 || fsize == 0 {
        return Err(KernelError::BadDims(format!(
            "conv2d filter size {fsize} must be odd"
        )));
    }
    if fsize > 7 {
        return Err(KernelError::BadDims(format!(
            "conv2d filter size {fsize} exceeds the 7-row register layout"
        )));
    }
    if rows < fsize || cols < fsize {
        return Err(KernelError::BadDims(format!(
            "conv2d input {rows}x{cols} is smaller than the {fsize}x{fsize} filter"
        )));
    }
    let epv = cfg.elems_per_vec();
    if cols % epv != 0 {
        return Err(KernelError::BadDims(format!(
            "conv2d width {cols} must be a multiple of {epv} so output strips stay line-aligned"
        )));
    }
    assert_eq!(input.len(), rows * cols);
    assert_eq!(f.len(), fsize * fsize);

    let oh = rows - fsize + 1;
    let ow = cols - fsize + 1;
    let in_base = 0x1000;
    let f_base = align_up(in_base + rows * cols * 4, 256);
    let out_base = align_up(f_base + fsize * fsize * 4, 256);

    let mut src = String::new();
    src.push_str("# conv2d: direct convolution, filter window fully unrolled\n");
    src.push_str(&data_directives(in_base, &i32_bytes(&input)));
    src.push_str(&data_directives(f_base, &i32_bytes(&f)));
    let _ = write!(
        src,
        "\
li a0, {in_base}
li a1, {f_base}
li a2, {out_base}
li a7, 4
li s0, 0
row_loop:
li s1, 0
col_loop:
li t0, {ow}
sub t0, t0, s1
vsetvli t1, t0, e32
vmv.v.x v1, x0
li t2, {cols}
mul t3, s0, t2
add t3, t3, s1
slli t3, t3, 2
add t3, a0, t3
addi t4, a1, 0
"
    );
    // Filter window, fully unrolled. Taps of filter row dr share one
    // broadcast register and one input register so consecutive taps reuse
    // their registers before the pair rotates to the next row.
    for dr in 0..fsize {
        let vb = 2 + dr;
        let vin = 2 + fsize + dr;
        for dc in 0..fsize {
            let _ = write!(
                src,
                "\
vlse32.v v{vb}, (t4), x0
addi t5, t3, {off}
vlse32.v v{vin}, (t5), a7
vmacc.vv v1, v{vb}, v{vin}
addi t4, t4, 4
",
                off = dc * 4,
            );
        }
        let _ = writeln!(src, "addi t3, t3, {}", cols * 4);
    }
    let _ = write!(
        src,
        "\
li t2, {cols}
mul t5, s0, t2
add t5, t5, s1
slli t5, t5, 2
add t5, a2, t5
vse32.v v1, (t5)
add s1, s1, t1
li t0, {ow}
blt s1, t0, col_loop
addi s0, s0, 1
li t0, {oh}
blt s0, t0, row_loop
halt
"
    );

    let golden = i32_bytes(&golden_conv2d(rows, cols, fsize, &input, &f));
    let program = parse_kernel("conv2d", &src);
    Ok(KernelCase {
        name: "conv2d".to_string(),
        source: src,
        program,
        golden,
        output_addr: out_base,
        problem_size: format!("{rows}x{cols}, filter {fsize}x{fsize}"),
        // One accumulator plus a broadcast/input register pair per filter row.
        expected_active_registers: (2 * fsize - 1)..=(2 * fsize + 3),
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
    fn delta_filter_copies_the_input_interior() {
        let cfg = cfg();
        let (rows, cols, fsize) = (16, 16, 3);
        let input: Vec<i32> = (0..rows * cols).map(|i| i as i32).collect();
        let mut f = vec![0i32; 9];
        f[0] = 1; // tap at (0,0): out[r][c] = in[r][c]
        let k = build_conv2d_with(&cfg, rows, cols, fsize, input.clone(), f).unwrap();
        let out = run(&k.program, &cfg, &[], 10_000_000).unwrap();
        let got = k.output_of(&out.memory);
        for r in 0..rows - 2 {
            for c in 0..cols - 2 {
                let idx = (r * cols + c) * 4;
                let v = i32::from_le_bytes(got[idx..idx + 4].try_into().unwrap());
                assert_eq!(v, input[r * cols + c]);
            }
        }
    }

    #[test]
    fn random_filter_matches_the_direct_convolution() {
        let cfg = cfg();
        let k = build_conv2d(&cfg, 16, 16, 7, 9).unwrap();
        let out = run(&k.program, &cfg, &[], 50_000_000).unwrap();
        assert_eq!(k.output_of(&out.memory), k.golden.as_slice());
    }

    #[test]
    fn register_budget_matches_the_unrolled_layout() {
        let cfg = cfg();
        let k = build_conv2d(&cfg, 32, 32, 7, 9).unwrap();
        let r = analyze_registers(&k.program);
        assert_eq!(r.active_registers, 15);
        assert!(k.expected_active_registers.contains(&r.active_registers));
    }

    #[test]
    fn even_filters_are_rejected() {
        let cfg = cfg();
        assert!(matches!(
            build_conv2d(&cfg, 32, 32, 4, 1),
            Err(KernelError::BadDims(_))
        ));
    }
}
