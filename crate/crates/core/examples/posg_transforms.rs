//! Agent indication and policy merging on a random game whose agents share
//! observation labels.

use parshare::posg::{
    apply_agent_indication, expected_returns, merge_policies, observation_spaces_disjoint,
    random_posg, Policy, Posg, PosgShape,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let shape = PosgShape {
        n_states: 3,
        action_sizes: vec![2, 3],
        obs_sizes: vec![2, 2],
    };
    let g = random_posg(&shape, false, &mut rng);
    println!("observations: {:?}", g.observations);
    println!("disjoint before indication: {}", observation_spaces_disjoint(&g));

    let tagged = apply_agent_indication(&g);
    println!("disjoint after indication:  {}", observation_spaces_disjoint(&tagged));

    let policies: Vec<Policy> = (0..g.n_agents()).map(|i| Policy::random(&g, i, &mut rng)).collect();
    let lifted: Vec<Policy> = policies.iter().enumerate().map(|(i, p)| p.tagged(i)).collect();
    let shared = merge_policies(&tagged, &lifted).unwrap();
    println!("shared policy has {} entries", shared.table.len());

    let horizon = 4;
    let refs: Vec<&Policy> = policies.iter().collect();
    let before = expected_returns(&g, &refs, horizon);
    let after = expected_returns(&tagged, &[&shared, &shared], horizon);
    for (i, (b, a)) in before.iter().zip(&after).enumerate() {
        println!("agent {i}: individual {b:+.12}  shared {a:+.12}");
    }

    let text = g.to_json();
    let back = Posg::from_json(&text).unwrap();
    println!("json: {} bytes, round trip equal: {}", text.len(), back == g);
}
