use proptest::prelude::*;

use deidforge::audio::{concat_with, ms_to_samples, samples_to_ms, AudioBuffer, ConcatOptions, CROSSFADE_MS};
use deidforge::corpus::{Category, SpeakerRole};
use deidforge::eval::{align, wder, EditOp};
use deidforge::surrogate::{Exclusions, Lexicon, SurrogateConfig, SurrogateGenerator, SurrogateKey};

fn seq(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..4, 0..max)
}

proptest! {
    #[test]
    fn distance_is_symmetric_and_bounded(r in seq(40), h in seq(40)) {
        let d = align(&r, &h).cost();
        prop_assert_eq!(d, align(&h, &r).cost());
        prop_assert!(d >= r.len().abs_diff(h.len()));
        prop_assert!(d <= r.len().max(h.len()));
        prop_assert_eq!(d == 0, r == h);
    }

    #[test]
    fn distance_obeys_triangle_inequality(a in seq(25), b in seq(25), c in seq(25)) {
        prop_assert!(align(&a, &c).cost() <= align(&a, &b).cost() + align(&b, &c).cost());
    }

    #[test]
    fn transposed_alignment_is_an_alignment_of_the_swap(r in seq(30), h in seq(30)) {
        let ops = align(&r, &h);
        let t = ops.transposed();
        prop_assert_eq!(t.cost(), ops.cost());
        prop_assert_eq!(t.ref_len(), h.len());
        prop_assert_eq!(t.hyp_len(), r.len());
        for op in &t.ops {
            if let EditOp::Match { r: a, h: b } = *op {
                prop_assert_eq!(h[a], r[b]);
            }
        }
    }

    #[test]
    fn correct_roles_give_zero_wder(words in seq(30), roles in prop::collection::vec(any::<bool>(), 30)) {
        let roles: Vec<SpeakerRole> = roles[..words.len()]
            .iter()
            .map(|d| if *d { SpeakerRole::Doctor } else { SpeakerRole::Other })
            .collect();
        let w = wder(&align(&words, &words), &roles, &roles).unwrap();
        prop_assert_eq!(w.value, 0.0);
        prop_assert_eq!(w.matched, words.len());
    }

    #[test]
    fn millisecond_round_trip(ms in 0u64..10_000_000, rate in prop::sample::select(vec![1000u32, 8000, 16_000, 22_050, 44_100, 48_000])) {
        prop_assert_eq!(samples_to_ms(ms_to_samples(ms, rate), rate), ms);
        prop_assert!(ms_to_samples(ms + 1, rate) >= ms_to_samples(ms, rate));
    }

    #[test]
    fn crossfade_shortens_by_overlap(lens in prop::collection::vec(100usize..2000, 1..6)) {
        let rate = 16_000;
        let bufs: Vec<AudioBuffer<f32>> = lens
            .iter()
            .map(|&n| AudioBuffer::new(vec![0.25; n], rate).unwrap())
            .collect();
        let out = concat_with(&bufs, ConcatOptions { crossfade: true }).unwrap();
        let fade = ms_to_samples(CROSSFADE_MS, rate);
        prop_assert_eq!(out.len(), lens.iter().sum::<usize>() - fade * (lens.len() - 1));
        prop_assert!(out.samples().iter().all(|s| (s - 0.25).abs() < 1e-6));
    }

    #[test]
    fn unit_gain_is_identity(samples in prop::collection::vec(-1.0f64..=1.0, 0..500)) {
        let buf = AudioBuffer::new(samples, 8000).unwrap();
        let (scaled, clipped) = buf.scaled(1.0);
        prop_assert_eq!(clipped, 0);
        prop_assert_eq!(scaled, buf);
    }

    #[test]
    fn excluded_phrases_are_never_drawn(seed in any::<u64>(), picks in prop::collection::vec(0usize..1000, 1..20)) {
        let lexicon = Lexicon::builtin();
        let names = lexicon.candidates(&Category::PersonName).unwrap();
        let banned: Vec<Vec<String>> = picks
            .iter()
            .map(|i| names[i % names.len()].split(' ').map(String::from).collect())
            .collect();
        let generator = SurrogateGenerator::new(&lexicon, SurrogateConfig { seed, ..Default::default() })
            .with_exclusions(Exclusions::new(banned.clone()));
        for original in &banned {
            let key = SurrogateKey::new("c", &original.join(" "), Category::PersonName);
            let out = generator.generate(original, original.len(), &key).unwrap();
            let lowered: Vec<String> = out.iter().map(|w| w.to_lowercase()).collect();
            prop_assert!(!banned.iter().any(|b| b.iter().map(|w| w.to_lowercase()).collect::<Vec<_>>() == lowered));
        }
    }
}
