//! The value-function bounds behind the search: IBP and CROWN-IBP over a mask
//! box, the linear planes, and interval bounds on the gradient.

use shapley_bounds::propagate::{gradient_interval, ibp_value_bounds, lbp_value_linear};
use shapley_bounds::{AttributionProblem, IntervalBox, Layer, Mask, Network};

fn main() -> shapley_bounds::Result<()> {
    let net = Network::new(
        vec![
            Layer::affine(vec![vec![1.0, -1.0, 0.5], vec![0.5, 1.0, -1.0]], vec![0.0, 0.2]),
            Layer::Relu,
            Layer::affine(vec![vec![1.0, 2.0]], vec![-0.1]),
        ],
        3,
        1,
    )?;
    let problem = AttributionProblem::baseline(net, vec![1.0, 1.0, 1.0], vec![-1.0, 0.0, 0.5], 0)?;

    // feature 1 fixed in, features 2 and 3 free
    let mask_box = IntervalBox::new(&[1.0, 0.0, 0.0], &[1.0, 1.0, 1.0])?;
    let ibp = ibp_value_bounds(&problem, &mask_box)?;
    let lbp = lbp_value_linear(&problem, &mask_box)?;
    println!("IBP  [{:+.4}, {:+.4}]", ibp.lb, ibp.ub);
    println!("LBP  [{:+.4}, {:+.4}]", lbp.interval.lb, lbp.interval.ub);
    if let Some(planes) = &lbp.linear {
        println!("lower plane {:?} + {:+.4}", planes.lower.slope, planes.lower.offset);
        println!("upper plane {:?} + {:+.4}", planes.upper.slope, planes.upper.offset);
    }
    for code in [0b001u64, 0b011, 0b101, 0b111] {
        let m = Mask::from_bits(code, 3);
        println!("v({m}) = {:+.4}", problem.value(&m)?);
    }
    let grad = gradient_interval(&problem, &mask_box)?;
    for (j, iv) in grad.intervals().iter().enumerate() {
        println!("dv/dmu_{} in [{:+.4}, {:+.4}]", j + 1, iv.lb, iv.ub);
    }
    Ok(())
}
