use logodm_core::schema::{
    decode_coded_field, encode_coded_field, validate_record, AttributeDescriptor, CellValue,
    DatasetSchema, FlagSet, MAX_FLAGS,
};
use logodm_core::Error;
use proptest::prelude::*;

fn flag_attr(k: usize) -> AttributeDescriptor {
    AttributeDescriptor::coded_flag("flags", (0..k).map(|i| format!("flag{i}"))).unwrap()
}

fn schema() -> DatasetSchema {
    DatasetSchema::new(
        vec![
            AttributeDescriptor::categorical("family", ["complete", "single"]).unwrap(),
            AttributeDescriptor::coded_flag("health", ["illness", "trauma", "surgery"]).unwrap(),
            AttributeDescriptor::class_label("outcome", ["C", "I", "S"]).unwrap(),
        ],
        Some("outcome".into()),
    )
    .unwrap()
}

fn cell() -> impl Strategy<Value = CellValue> {
    prop_oneof![
        Just(CellValue::Missing),
        prop::sample::select(vec!["complete", "single", "other", "C", "S", "X"]).prop_map(CellValue::category),
        prop::collection::btree_set(prop::sample::select(vec!["illness", "trauma", "surgery", "bogus"]), 0..3)
            .prop_map(|s| CellValue::FlagSet(s.into_iter().map(String::from).collect())),
    ]
}

proptest! {
    #[test]
    fn round_trip_every_subset(k in 1usize..=MAX_FLAGS, mask in any::<u16>()) {
        let attr = flag_attr(k);
        let set: FlagSet = (0..k)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| attr.flag_names()[b].clone())
            .collect();
        let code = encode_coded_field(&set, &attr).unwrap();
        prop_assert!(code < 10u64.pow(k as u32));
        prop_assert_eq!(decode_coded_field(code, &attr).unwrap(), set);
    }

    #[test]
    fn decode_accepts_exactly_binary_digits(k in 1usize..=6, raw in 0u64..1_000_000) {
        let attr = flag_attr(k);
        let digits = raw.to_string();
        let result = decode_coded_field(raw, &attr);
        if digits.len() > k {
            prop_assert!(matches!(result, Err(Error::CodeOverflow { .. })), "{raw} with {k} flags");
        } else if digits.chars().any(|c| c > '1') {
            prop_assert!(matches!(result, Err(Error::MalformedCode { .. })), "{raw} with {k} flags");
        } else {
            let flags = result.unwrap();
            prop_assert_eq!(flags.len(), digits.chars().filter(|&c| c == '1').count());
        }
    }

    #[test]
    fn validation_is_per_record(records in prop::collection::vec(prop::collection::vec(cell(), 2..=4), 1..12), seed in any::<u64>()) {
        let s = schema();
        let verdicts: Vec<_> = records.iter().map(|r| validate_record(r, &s)).collect();
        let mut order: Vec<usize> = (0..records.len()).collect();
        let mut state = seed;
        for i in (1..order.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (state >> 33) as usize % (i + 1));
        }
        for &i in &order {
            prop_assert_eq!(&validate_record(&records[i], &s), &verdicts[i]);
        }
    }
}

#[test]
fn five_flag_codes_compose_by_addition() {
    let attr = AttributeDescriptor::coded_flag(
        "health_problems",
        ["serious_illness", "psychological_trauma", "surgery", "accidents", "other"],
    )
    .unwrap();
    let one = |name: &str| encode_coded_field(&[name.to_string()].into(), &attr).unwrap();
    assert_eq!(one("serious_illness"), 10000);
    assert_eq!(one("other"), 1);
    let both: FlagSet = ["serious_illness".to_string(), "surgery".to_string()].into();
    assert_eq!(encode_coded_field(&both, &attr).unwrap(), 10100);
    assert_eq!(one("serious_illness") + one("surgery"), 10100);
}

#[test]
fn malformed_code_reports_digit_position() {
    let attr = flag_attr(5);
    match decode_coded_field(10200, &attr) {
        Err(Error::MalformedCode { position, digit, .. }) => {
            assert_eq!(position, 2);
            assert_eq!(digit, 2);
        }
        other => panic!("expected a malformed code, got {other:?}"),
    }
}

#[test]
fn schema_json_uses_documented_keys() {
    let text = schema().to_json_pretty();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["class_attribute"], "outcome");
    assert_eq!(value["attributes"][1]["kind"], "coded-flag");
    assert_eq!(value["attributes"][1]["flag_names"][0], "illness");
    assert_eq!(value["attributes"][0]["domain"][1], "single");
    assert_eq!(DatasetSchema::from_json_str(&text).unwrap(), schema());
}

#[test]
fn violations_name_the_field() {
    let record = vec![
        CellValue::category("married"),
        CellValue::FlagSet(FlagSet::new()),
        CellValue::category("C"),
    ];
    let verdict = validate_record(&record, &schema());
    assert!(!verdict.is_valid());
    assert_eq!(verdict.violations[0].attribute, "family");
    assert!(verdict.to_string().contains("married"));
}
