use fusetrack::appearance::{embedding_distance, train_embedder, DistanceMetric, EmbedderTrainConfig};
use fusetrack::sim::synthetic_identity_features;

#[test]
fn trained_embeddings_cluster_by_identity() {
    let train = synthetic_identity_features(10, 20, 16, 0.12, 5).unwrap();
    let cfg = EmbedderTrainConfig { steps: 300, ..Default::default() };
    let model = train_embedder(&train, &cfg).unwrap();
    let emb: Vec<_> = train.features.iter().map(|x| model.params.embed(x)).collect();
    let (mut intra, mut inter) = ((0.0, 0usize), (0.0, 0usize));
    for i in 0..emb.len() {
        for j in i + 1..emb.len() {
            let d = embedding_distance(&emb[i], &emb[j], DistanceMetric::Euclidean);
            let acc = if train.labels[i] == train.labels[j] { &mut intra } else { &mut inter };
            acc.0 += d;
            acc.1 += 1;
        }
    }
    let (intra, inter) = (intra.0 / intra.1 as f64, inter.0 / inter.1 as f64);
    assert!(intra < inter, "intra {intra} vs inter {inter}");
    assert!(model.loss_history.last() < model.loss_history.first());
    assert!(model.params.head_w.is_none());
}
