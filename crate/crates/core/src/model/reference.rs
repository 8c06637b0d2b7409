//! The fourteen-variable colorectal-cancer reference network.

use super::dag::Dag;
use super::schema::{NetworkSchema, Variable};

pub const SEX: &str = "v_sex";
pub const AGE: &str = "v_age";
pub const SES: &str = "v_SES";
pub const BMI: &str = "v_BMI";
pub const PA: &str = "v_PA";
pub const SD: &str = "v_SD";
pub const ALCOHOL: &str = "v_alc";
pub const SMOKING: &str = "v_smok";
pub const ANXIETY: &str = "v_anx";
pub const DEPRESSION: &str = "v_dep";
pub const HYPERTENSION: &str = "v_hypten";
pub const HYPERCHOLESTEROLEMIA: &str = "v_hypchol";
pub const DIABETES: &str = "v_diab";
pub const CRC: &str = "v_CRC";

pub const AGE_STATES: [&str; 4] = ["(24,34]", "(34,44]", "(44,54]", "(54,64]"];
pub const BMI_STATES: [&str; 4] = ["underweight", "normal", "overweight", "obese"];
pub const SD_STATES: [&str; 3] = ["short", "normal", "excessive"];
pub const SMOKING_STATES: [&str; 3] = ["non-smoker", "ex-smoker", "smoker"];
pub const YES_NO: [&str; 2] = ["no", "yes"];

/// Variables in declaration order with their state labels.
pub fn reference_schema() -> NetworkSchema {
    let v = |name: &str, states: &[&str]| Variable::new(name, states.iter().copied()).unwrap();
    NetworkSchema::new(vec![
        v(SEX, &["female", "male"]),
        v(AGE, &AGE_STATES),
        v(SES, &["1", "2", "3"]),
        v(BMI, &BMI_STATES),
        v(PA, &["insufficient", "sufficient"]),
        v(SD, &SD_STATES),
        v(ALCOHOL, &["low", "high"]),
        v(SMOKING, &SMOKING_STATES),
        v(ANXIETY, &YES_NO),
        v(DEPRESSION, &YES_NO),
        v(HYPERTENSION, &YES_NO),
        v(HYPERCHOLESTEROLEMIA, &YES_NO),
        v(DIABETES, &YES_NO),
        v(CRC, &YES_NO),
    ])
    .expect("reference schema is well formed")
}

/// Parent sets of the published factorization, by child.
pub const REFERENCE_PARENTS: [(&str, &[&str]); 12] = [
    (SES, &[SEX, AGE]),
    (SD, &[SEX, AGE]),
    (PA, &[SEX, AGE, SD, SES]),
    (DEPRESSION, &[SEX, AGE, SES]),
    (SMOKING, &[SEX, AGE, PA]),
    (ALCOHOL, &[SEX, AGE, SMOKING]),
    (BMI, &[SEX, AGE, PA, SMOKING]),
    (ANXIETY, &[SEX, SD, SMOKING, DEPRESSION]),
    (HYPERCHOLESTEROLEMIA, &[SEX, AGE, PA, SMOKING, BMI, ALCOHOL]),
    (DIABETES, &[SEX, AGE, PA, BMI]),
    (HYPERTENSION, &[AGE, PA, SMOKING, BMI, ALCOHOL, DIABETES]),
    (CRC, &[SEX, AGE, ALCOHOL, SMOKING, HYPERCHOLESTEROLEMIA, HYPERTENSION, DIABETES]),
];

/// Schema and structure of the reference network. `v_sex` and `v_age` are roots.
pub fn reference_crc_network() -> (NetworkSchema, Dag) {
    let schema = reference_schema();
    let mut dag = Dag::empty(schema.len());
    for (child, parents) in REFERENCE_PARENTS {
        let c = schema.index_of(child).unwrap();
        for p in parents {
            dag.add_arc(schema.index_of(p).unwrap(), c)
                .expect("reference structure is acyclic");
        }
    }
    (schema, dag)
}

/// Alternative spellings accepted for state labels: (variable, alias, label).
pub const LABEL_ALIASES: [(&str, &str, &str); 4] = [
    (SEX, "woman", "female"),
    (SEX, "man", "male"),
    (SEX, "women", "female"),
    (SEX, "men", "male"),
];

/// Canonical label for `label` of variable `var` (identity when no alias applies).
pub fn canonical_label<'a>(var: &str, label: &'a str) -> &'a str {
    LABEL_ALIASES
        .iter()
        .find(|(v, a, _)| *v == var && a.eq_ignore_ascii_case(label))
        .map_or(label, |(_, _, c)| c)
}
