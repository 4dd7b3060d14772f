use pbe_core::dsl::{
    detokenize_program, eval_program, format_program, match_token, parse_program, tokenize_program, Expression,
    Index, Nesting, Program, RegexToken, TokenType, Vocabulary, EOS,
};
use pbe_core::generator::{sample_program, Domain, SeededRng};
use proptest::prelude::*;
use rand::SeedableRng;

fn run(src: &str, input: &str) -> String {
    eval_program(&parse_program(src).unwrap(), input).unwrap()
}

#[test]
fn published_sample_rows() {
    let p = "GetToken(Alphanum, 3) | GetFrom(':') | GetFirst(Char, 4)";
    for (i, o) in [
        ("Ud 9:25,JV3 Obb", "2525,JV3 ObbUd92"),
        ("zLny xmHg 8:43 A44q", "843 A44qzLny"),
        ("cuL.zF.dDX,12:31", "dDX31cuLz"),
        ("ZiG OE bj3u 7:11", "bj3u11ZiGO"),
    ] {
        assert_eq!(run(p, i), o, "{i}");
    }
    let p = "GetToken(AllCaps, -2, GetSpan(AllCaps, 1, Start, AllCaps, 5, Start))";
    assert_eq!(run(p, "YDXJZ @ZYUD Wc-YKT GTIL BNX"), "W");
    assert_eq!(run(p, "JUGRB.MPKA.MTHV,tEczT-GZJ.MFT"), "MTHV");
}

#[test]
fn name_reordering_program() {
    let p = parse_program("GetToken(Alpha, -1) | ConstStr(',') | ConstStr(' ') | ToCase(Proper, GetToken(Alpha, 1))")
        .unwrap();
    assert_eq!(eval_program(&p, "Laura Jane Jones").unwrap(), "Jones, Laura");
    assert_eq!(eval_program(&p, "Steve P. Green (9)").unwrap(), "Green, Steve");
    assert_eq!(
        format_program(&p),
        "GetToken(Word, -1) | ConstStr(',') | ConstStr(' ') | ToCase(Proper, GetToken(Word, 1))"
    );
    let ids = tokenize_program(&p);
    assert_eq!(ids.len(), 9);
    assert_eq!(*ids.last().unwrap(), EOS);
}

#[test]
fn lowercase_prefix() {
    assert_eq!(run("ToCase(Lower, SubStr(1, 3))", "January"), "jan");
}

#[test]
fn repeated_expressions_detokenize() {
    let v = Vocabulary::get();
    let e = Expression::Nesting(Nesting::GetToken(TokenType::Word, Index::new(-1).unwrap()));
    let single = tokenize_program(&Program::new(vec![e]).unwrap());
    assert_eq!(single.len(), 2);
    assert_eq!(v.token(single[0]).unwrap().name(), "GetToken_Word_-1");
    let ids = [single[0], single[0], EOS];
    assert_eq!(detokenize_program(&ids).unwrap().len(), 2);
}

fn sampled(seed: u64) -> Program {
    sample_program(&mut SeededRng::seed_from_u64(seed), &Domain::full())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tokenize_round_trip(seed in any::<u64>()) {
        let p = sampled(seed);
        prop_assert_eq!(detokenize_program(&tokenize_program(&p)).unwrap(), p);
    }

    #[test]
    fn format_round_trip(seed in any::<u64>()) {
        let p = sampled(seed);
        prop_assert_eq!(parse_program(&format_program(&p)).unwrap(), p);
    }
}

proptest! {
    #[test]
    fn prefixes_concatenate(seed in any::<u64>(), v in "[ -~]{0,40}") {
        let p = sampled(seed);
        if let Ok(full) = eval_program(&p, &v) {
            for j in 1..p.len() {
                let prefix = Program::new(p.expressions()[..j].to_vec()).unwrap();
                prop_assert!(full.starts_with(&eval_program(&prefix, &v).unwrap()));
            }
        }
    }

    #[test]
    fn evaluation_is_deterministic(seed in any::<u64>(), v in "[ -~]{0,40}") {
        let p = sampled(seed);
        prop_assert_eq!(eval_program(&p, &v), eval_program(&p, &v));
    }

    #[test]
    fn matches_are_ordered_disjoint_and_maximal(v in "[ -~]{0,40}", r in 0usize..29) {
        let r = RegexToken::all().nth(r).unwrap();
        let m = match_token(r, &v);
        for w in m.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        for x in &m {
            prop_assert!(x.start < x.end);
            prop_assert_eq!(&v[x.start..x.end], x.text.as_str());
            if let RegexToken::Type(t) = r {
                let multi = !matches!(t, TokenType::Digit | TokenType::Char);
                if multi {
                    // Extending a run by one character must leave the class.
                    for (s, e) in [(x.start.wrapping_sub(1), x.end), (x.start, x.end + 1)] {
                        if s <= v.len() && e <= v.len() && s < e {
                            let ext = &v[s..e];
                            let again = match_token(r, ext);
                            prop_assert!(!(again.len() == 1 && again[0].text.len() == ext.len()),
                                "{:?} extends to {:?}", x.text, ext);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn negative_index_counts_from_the_end(v in "[ -~]{0,40}", t in 0usize..8) {
        let t = TokenType::ALL[t];
        let m = match_token(RegexToken::Type(t), &v);
        for i in 1..=m.len().min(5) {
            let e = Expression::Nesting(Nesting::GetToken(t, Index::new(-(i as i64)).unwrap()));
            let out = eval_program(&Program::new(vec![e]).unwrap(), &v).unwrap();
            prop_assert_eq!(&out, &m[m.len() - i].text);
        }
    }
}
