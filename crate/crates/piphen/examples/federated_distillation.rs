//! Federated distillation over three clients: weights go down, soft labels
//! on a shared proxy set come back, and the per-round label traffic always
//! stays below one weight download.

use piphen::autodiff::Params;
use piphen::fed::{
    init_fd_model, make_blobs, proxy_inputs, run_federation, soft_label_bytes, weight_bytes,
    FdClient, FdConfig, FdModelConfig,
};

fn main() {
    let model_cfg = FdModelConfig::small();
    let mut server = init_fd_model(&model_cfg, 1000).unwrap();
    let mut clients: Vec<FdClient> = (0..3)
        .map(|i| FdClient {
            id: i,
            data: make_blobs(&model_cfg, 24, 10 + i as u64),
            params: Params::new(),
            failed: false,
        })
        .collect();
    let proxy = proxy_inputs(&model_cfg, 32, 999);

    println!(
        "one weight download = {} bytes, one soft-label upload = {} bytes",
        weight_bytes(&server),
        soft_label_bytes(proxy.len(), model_cfg.n_classes)
    );

    let fd_cfg = FdConfig { rounds: 8, lr: 1e-2, proxy_size: proxy.len(), ..Default::default() };
    let records = run_federation(&mut server, &mut clients, &proxy, &model_cfg, &fd_cfg).unwrap();
    for r in &records {
        println!(
            "round {:>2}: kd_loss {:.5e}  down {} B  up {} B",
            r.round, r.kd_loss, r.bytes_down, r.bytes_up
        );
        assert!(r.bytes_up < r.bytes_down, "label traffic must undercut weights");
    }
    let first = records.first().unwrap().kd_loss;
    let last = records.last().unwrap().kd_loss;
    println!("ensemble/global KL: {first:.4e} -> {last:.4e}");
}
