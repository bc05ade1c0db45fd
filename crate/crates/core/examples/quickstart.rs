use complearn::{
    build_graph, derive_rng, init_state, mixing_matrix, normalize, random_world, sample_signal,
    step, theoretical_gamma, uniform_priors, CompressionSpec, GraphKind, StreamKey, UpdateMode,
    PURPOSE_GRAPH, PURPOSE_WORLD,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, m) = (5, 8);
    let mut rng = derive_rng(42, PURPOSE_WORLD, 0, 0, 0);
    let world = random_world(n, m, 10, 1e-3, true, 0.1, &mut rng)?;
    let mut rng = derive_rng(42, PURPOSE_GRAPH, 0, 0, 0);
    let topology = build_graph(GraphKind::Ring, n, None, &mut rng)?;
    let matrix = mixing_matrix(&topology)?;

    let spec = CompressionSpec::top_k(2, 64)?;
    let gamma = theoretical_gamma(matrix.spectral_gap, matrix.beta, spec.omega(m)?)?;
    let priors = uniform_priors(n, m);
    let mut state = init_state(
        &world,
        &matrix,
        0.25_f64.max(gamma),
        &priors,
        UpdateMode::Standard,
        false,
    )?;

    let key = StreamKey::new(42, 0);
    for t in 0..2000 {
        let signals: Vec<usize> = (0..n)
            .map(|i| sample_signal(&world, i, &mut key.signal(t, i as u64)))
            .collect();
        step(&mut state, &world, &matrix, &spec, &signals, &key)?;
    }

    let beliefs = normalize(&state.agents[0].log_mu);
    println!("agent 0 beliefs after 2000 rounds: {beliefs:.4?}");
    Ok(())
}
