//! Padding observations of different lengths to one input size and trimming
//! a shared action distribution back to each agent's own actions.

use parshare::posg::{pad_observation, pad_observation_with, trim_action_vector, IdEncoding};

fn main() {
    let observations: [&[f64]; 3] = [&[0.5, 1.0], &[0.2, 0.0, 0.7, 0.1], &[1.0]];
    let width = observations.iter().map(|o| o.len()).max().unwrap() + 1;

    for (i, obs) in observations.iter().enumerate() {
        let p = pad_observation(obs, width, Some(i)).unwrap();
        println!("agent {i}: {:?} -> {:?} (id {:?})", obs, p.data, p.decoded_id());
        assert_eq!(p.unpad(), *obs);
    }

    let one_hot = pad_observation_with(observations[2], 1 + 3, Some(2), IdEncoding::OneHot { n_agents: 3 }).unwrap();
    println!("one-hot id: {:?}", one_hot.data);

    let shared_output = [0.1, 0.4, 0.2, 0.3];
    for len in [2, 3, 4] {
        let t = trim_action_vector(&shared_output, len).unwrap();
        println!("{len} actions: {t:?}");
    }
    println!("all-zero head: {:?}", trim_action_vector(&[0.0, 0.0, 1.0], 2).unwrap());
}
