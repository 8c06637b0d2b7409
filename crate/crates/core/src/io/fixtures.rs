//! Published reference values: class percentages of the cohort and the
//! sleep-duration tables (prior, 2012 posterior, 0.9 intervals, 2012–2015
//! evolution for men aged (24,34]).

use serde::{Deserialize, Serialize};

use crate::model::reference::*;
use crate::model::{NamedDag, NetworkSchema};

/// Published percentages carry rounding; vectors sum to 1 within this.
pub const MARGINAL_ROUNDING: f64 = 5e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalTable {
    /// (variable, probabilities in schema state order), schema order.
    pub entries: Vec<(String, Vec<f64>)>,
}

impl MarginalTable {
    pub fn get(&self, var: &str) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(n, _)| n == var)
            .map(|(_, p)| p.as_slice())
    }

    /// Vectors in `schema` order, if every variable is present.
    pub fn for_schema(&self, schema: &NetworkSchema) -> Option<Vec<Vec<f64>>> {
        schema
            .variables()
            .iter()
            .map(|v| self.get(v.name()).map(<[f64]>::to_vec))
            .collect()
    }
}

/// Sleep-duration summary for one (sex, age) cell: (short, normal, excessive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdCell {
    pub sex: String,
    pub age: String,
    pub mean: [f64; 3],
    pub interval: [[f64; 2]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdYear {
    pub year: i32,
    pub mean: [f64; 3],
    pub interval: [[f64; 2]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedFixtures {
    pub marginals: MarginalTable,
    pub schema: NetworkSchema,
    pub dag: NamedDag,
    /// SD prior mean used in every (sex, age) cell.
    pub sd_prior_mean: [f64; 3],
    /// 2012 posterior means and 0.9 intervals, all eight cells.
    pub sd_2012: Vec<SdCell>,
    /// Men aged (24,34], 2012 to 2015.
    pub sd_evolution: Vec<SdYear>,
    /// Equivalent sample size reported for the fit.
    pub alpha: f64,
}

pub fn published_marginals() -> MarginalTable {
    // binary yes/no variables are stored (no, yes)
    MarginalTable {
        entries: vec![
            (SEX.into(), vec![0.3068, 0.6932]),
            (AGE.into(), vec![0.2121, 0.3802, 0.2903, 0.1173]),
            (SES.into(), vec![0.2393, 0.6197, 0.141]),
            (BMI.into(), vec![0.011, 0.4127, 0.4067, 0.1696]),
            (PA.into(), vec![0.4721, 0.5279]),
            (SD.into(), vec![0.1088, 0.8901, 0.0011]),
            (ALCOHOL.into(), vec![0.9505, 0.0495]),
            (SMOKING.into(), vec![0.499, 0.3016, 0.1994]),
            (ANXIETY.into(), vec![0.973, 0.027]),
            (DEPRESSION.into(), vec![0.9953, 0.0047]),
            (HYPERTENSION.into(), vec![0.8495, 0.1505]),
            (HYPERCHOLESTEROLEMIA.into(), vec![0.4868, 0.5132]),
            (DIABETES.into(), vec![0.9637, 0.0363]),
            (CRC.into(), vec![0.9993, 0.0007]),
        ],
    }
}

fn cell(sex: &str, age: &str, mean: [f64; 3], interval: [[f64; 2]; 3]) -> SdCell {
    SdCell {
        sex: sex.into(),
        age: age.into(),
        mean,
        interval,
    }
}

pub fn published_fixtures() -> PublishedFixtures {
    let (schema, dag) = reference_crc_network();
    let [a1, a2, a3, a4] = AGE_STATES;
    let sd_2012 = vec![
        cell("male", a1, [0.0600, 0.9384, 0.0016], [[0.0583, 0.0617], [0.9367, 0.9401], [0.0013, 0.0019]]),
        cell("female", a1, [0.0711, 0.9264, 0.0025], [[0.0686, 0.0737], [0.9238, 0.929], [0.002, 0.003]]),
        cell("male", a2, [0.0897, 0.9092, 0.0011], [[0.0881, 0.0914], [0.9076, 0.9108], [0.0009, 0.0013]]),
        cell("female", a2, [0.1039, 0.8952, 0.0009], [[0.1013, 0.1064], [0.8926, 0.8978], [0.0007, 0.0012]]),
        cell("male", a3, [0.1211, 0.8778, 0.0012], [[0.1189, 0.1232], [0.8756, 0.88], [0.0009, 0.0014]]),
        cell("female", a3, [0.1581, 0.8407, 0.0012], [[0.1543, 0.1619], [0.8369, 0.8445], [0.0008, 0.0015]]),
        cell("male", a4, [0.1386, 0.8604, 0.0010], [[0.1347, 0.1425], [0.8565, 0.8643], [0.0007, 0.0014]]),
        cell("female", a4, [0.2256, 0.7737, 0.0007], [[0.2175, 0.2338], [0.7654, 0.7818], [0.0003, 0.0013]]),
    ];
    let year = |year, mean, interval| SdYear { year, mean, interval };
    let sd_evolution = vec![
        year(2012, [0.0600, 0.9384, 0.0016], [[0.0583, 0.0617], [0.9367, 0.9401], [0.0013, 0.0019]]),
        year(2013, [0.0600, 0.9388, 0.0015], [[0.0581, 0.0613], [0.9372, 0.9404], [0.0013, 0.0018]]),
        year(2014, [0.0595, 0.9389, 0.0015], [[0.0579, 0.0612], [0.9373, 0.9406], [0.0013, 0.0018]]),
        year(2015, [0.0608, 0.9378, 0.0013], [[0.0591, 0.0626], [0.9360, 0.9396], [0.0011, 0.0016]]),
    ];
    PublishedFixtures {
        marginals: published_marginals(),
        dag: dag.to_named(&schema),
        schema,
        sd_prior_mean: [0.1024, 0.8963, 0.0011],
        sd_2012,
        sd_evolution,
        alpha: 31.69,
    }
}
