use permclt::gaussian::{AlphaFamily, IntegralSampler, LimitKernel, uniform_grid};

fn main() {
    let m = 32usize;
    let kernel = LimitKernel::tableau();
    let times = uniform_grid(m);
    let fam = AlphaFamily::tableau();
    let big_m = 1e5f64;
    for cells in [256usize, 512, 1024] {
        let sampler = IntegralSampler::new(&fam, m, cells / m, cells).unwrap();
        let mut worst_ratio = 0.0f64;
        let mut worst_at = (0, 0);
        let mut worst_bias = 0.0f64;
        for k1 in 0..=m { for k2 in k1..=m {
            let target = kernel.sigma(times[k1], times[k2]).unwrap();
            let vj = kernel.sigma(times[k1], times[k1]).unwrap();
            let vk = kernel.sigma(times[k2], times[k2]).unwrap();
            let se = ((vj * vk + target * target) / big_m).sqrt();
            let bias = (sampler.exact_covariance(k1, k2) - target).abs();
            worst_bias = worst_bias.max(bias);
            if se > 0.0 {
                let r = bias / se;
                if r > worst_ratio { worst_ratio = r; worst_at = (k1, k2); }
            }
        }}
        println!("cells {cells}: max bias {worst_bias:.3e}, worst bias/SE {worst_ratio:.2} at {worst_at:?}");
    }
}
