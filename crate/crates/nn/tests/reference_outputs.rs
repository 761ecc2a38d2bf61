//! Layer outputs compared against values produced by a reference
//! implementation (Keras, float64) for the same deterministic weights.

use fpgan_nn::{Activation, LayerSpec, Network, NetworkSpec, Padding, Tensor};

/// `0.5 * sin(i + offset)` for i in 0..n, the weight pattern used for the references.
fn pattern(shape: &[usize], offset: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|i| 0.5 * (i as f64 + offset).sin()).collect()).unwrap()
}

fn shifted(mut t: Tensor, by: f64) -> Tensor {
    t.data_mut().iter_mut().for_each(|v| *v += by);
    t
}

fn run(layers: Vec<LayerSpec>, params: Vec<Vec<Tensor>>) -> Tensor {
    let mut net = Network::new(NetworkSpec::sequential(vec![5, 2], layers), 0).unwrap();
    net.set_params(params).unwrap();
    net.predict(&[&pattern(&[2, 5, 2], 1.0)]).unwrap()
}

fn assert_close(got: &Tensor, want: &[f64], shape: &[usize]) {
    assert_eq!(&got.shape()[1..], shape);
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.data().iter().zip(want).enumerate() {
        assert!((g - w).abs() < 1e-9, "element {i}: got {g}, want {w}");
    }
}

#[test]
fn conv1d_same_padding() {
    let y = run(
        vec![LayerSpec::conv1d(3, 3, Padding::Same, Activation::Tanh)],
        vec![vec![pattern(&[3, 2, 3], 2.0), pattern(&[3], 3.0)]],
    );
    assert_close(&y, CONV_SAME, &[5, 3]);
}

#[test]
fn conv1d_valid_stride_two() {
    let spec = LayerSpec::Conv1d { filters: 2, kernel_size: 2, stride: 2, padding: Padding::Valid, activation: Activation::Linear };
    let y = run(vec![spec], vec![vec![pattern(&[2, 2, 2], 4.0), pattern(&[2], 5.0)]]);
    assert_close(&y, CONV_VALID_S2, &[2, 2]);
}

#[test]
fn conv1d_transpose_same_stride_two() {
    let y = run(
        vec![LayerSpec::conv1d_transpose(3, 3, 2, Padding::Same, Activation::Linear)],
        vec![vec![pattern(&[2, 3, 3], 6.0), pattern(&[3], 7.0)]],
    );
    assert_close(&y, CONVT_SAME, &[10, 3]);
}

#[test]
fn conv1d_transpose_valid_stride_three() {
    let y = run(
        vec![LayerSpec::conv1d_transpose(2, 4, 3, Padding::Valid, Activation::Linear)],
        vec![vec![pattern(&[2, 4, 2], 8.0), pattern(&[2], 9.0)]],
    );
    assert_close(&y, CONVT_VALID, &[16, 2]);
}

#[test]
fn conv1d_transpose_same_even_kernel() {
    let y = run(
        vec![LayerSpec::conv1d_transpose(2, 4, 2, Padding::Same, Activation::Linear)],
        vec![vec![pattern(&[2, 4, 2], 10.0), pattern(&[2], 11.0)]],
    );
    assert_close(&y, CONVT_SAME_K4, &[10, 2]);
}

#[test]
fn lstm_over_a_sequence() {
    let y = run(
        vec![LayerSpec::lstm(3, Activation::Tanh)],
        vec![vec![pattern(&[2, 12], 12.0), pattern(&[3, 12], 13.0), pattern(&[12], 14.0)]],
    );
    assert_close(&y, LSTM_SEQ, &[3]);
}

#[test]
fn lstm_single_step_on_flattened_input() {
    let y = run(
        vec![LayerSpec::Flatten, LayerSpec::lstm(3, Activation::Relu)],
        vec![vec![], vec![pattern(&[10, 12], 15.0), pattern(&[3, 12], 16.0), shifted(pattern(&[12], 17.0), 0.6)]],
    );
    assert_close(&y, LSTM_ONE_RELU, &[3]);
}

#[test]
fn max_pool_two() {
    let y = run(vec![LayerSpec::max_pool1d(2)], vec![vec![]]);
    assert_close(&y, POOL2, &[2, 2]);
}

const CONV_SAME: &[f64] = &[
    0.2619608487205868, -0.24365062708209076, -0.490642749709449, 0.09733220235439462,
    -0.37961303640899735, -0.4849674250950722, 0.041630600701288566, -0.4307475026203535,
    -0.49269461044809143, 0.06743391314529795, -0.2808488151929967, -0.3621884612780264,
    0.21715303497844546, -0.29943251035192076, -0.5038560625628968, -0.1748564482228541,
    -0.4831828364430379, -0.3738965295298527, 0.05832169010327352, -0.2968132367274604,
    -0.37056338952642776, 0.10344793323466893, -0.3296692581476461, -0.4413290257069416,
    0.054994981564502034, -0.4468018186707231, -0.5186521626085605, -0.15778819473487174,
    -0.4356778998284303, -0.33228883366113654,
];
const CONV_VALID_S2: &[f64] = &[
    -0.5643532264816895, 0.011652880269777732, -0.2505739769620614, -0.13536492628902252,
    -0.283585566944657, -0.19246909518478617, -0.7180392453470231, -0.254196549667722,
];
const CONVT_SAME: &[f64] = &[
    0.4175395556871089, 0.5674404771145325, 0.1956392407686897, 0.24447204350077734,
    0.4143053685991839, 0.2032282484745999, 0.2729152243773364, 0.6587065733283152,
    0.43888613654224273, 0.4851200959244376, 0.4471291958576515, -0.001950224838725284,
    0.17282668776923882, 0.37378835321180615, 0.23109073052474824, 0.2821550633999007,
    0.6146283818002871, 0.38201520047749626, 0.5136317102799648, 0.43126829638469644,
    -0.04760120031101325, 0.21043352340578822, 0.4423960418333207, 0.2676216796131742,
    0.33007038289362983, 0.6683463234685898, 0.39214773648351553, 0.4730919398920036,
    0.41824474274741513, -0.021134742044693067, 0.31111477881542127, 0.36905436285447374,
    0.08768706766651727, 0.32620454165967544, 0.6105780561405886, 0.33358892163081744,
    0.4820982097661064, 0.38853697833997347, -0.06224335914185217, 0.18579957737950742,
    0.47465155536409565, 0.3271110823147323, 0.38709991183972925, 0.6641518440078988,
    0.3305856336883604, 0.4495451390532485, 0.39544900857304266, -0.02222111668267915,
    0.12611047618381155, 0.4597701950858795, 0.3707193169648787, 0.37043634104566336,
    0.5972952879366831, 0.2750037016670652, 0.43832863015105694, 0.3542608827123282,
    -0.0555126865343499, 0.17253253143972916, 0.5085024534757566, 0.37695756486538634,
];
const CONVT_VALID: &[f64] = &[
    0.3487408708948452, -0.4038631849168913, -0.07910294513030972, -0.448305501149219,
    0.3007162990179498, 0.006571241935905803, 0.5018150092683393, -0.13114093094020807,
    0.3289534323078257, -0.33564707351241874, 0.014399138035098652, -0.4154828302782022,
    0.025613797773707092, -0.12060323586231989, 0.38893737383557114, -0.04275133837462572,
    0.2709196786551401, -0.4311812862168947, 0.06048707805840156, -0.5388955340977285,
    -0.06904325862336433, -0.39918503324291055, 0.34373641666120525, 0.003938511552336432,
    0.5076634790120389, -0.20129119585021846, 0.25214718264418123, -0.3954232592642113,
    0.026610965703351613, -0.3425104872303668, 0.309324968123704, -0.08992120444635682,
    -0.002657616046266714, -0.24607420334572339, 0.44280304297777706, -0.04212046507800857,
    0.21773573410667998, -0.4892829752629045, -0.0077786828169964795, -0.5158683915680157,
    -0.03706906458376796, -0.3399339193444166, 0.37578924955083304, -0.020676163306413475,
    0.48948632819474813, -0.2770749244020634, 0.17166959410053023, -0.44536845978233375,
    0.053117540233026256, -0.2639221600341465, 0.18400259795206872, -0.0239376770799129,
    0.4778098367089464, -0.05980250458384376, 0.16362164694060197, -0.5300768679086323,
    -0.05901023714545259, -0.4734156736165942, 0.014272591022114062, -0.27527206921818426,
    0.3943214873947577, -0.06531199175270713, 0.24115641901181514, -0.4407829484696946,
];
const CONVT_SAME_K4: &[f64] = &[
    -0.40533804687828023, 0.01029533838037322, -0.1707211949902278, -0.3874898987625168,
    -0.9580807983024442, -0.6440925338546131, -0.28049366931627295, 0.14402034274595638,
    -0.27395590581727924, -0.43633426154003063, -1.01195866627974, -0.4922433617049982,
    -0.23004040216392285, 0.24738473868546224, -0.293392502891071, -0.49419534757940997,
    -0.9507158904905253, -0.5294285316911478, -0.39672937777252604, -0.0861971080018894,
    -0.48831861178955005, -0.48555887881843707, -0.9895854808244688, -0.385265452914036,
    -0.13681276602577713, 0.24114904344665206, -0.43252165549310395, -0.582905023845816,
    -0.9074468231676028, -0.3939621017300644, -0.06656244941725725, 0.11054757587259662,
    -0.5240579519672209, -0.6731229191409778, -0.9282118065761569, -0.26896906453204183,
    -0.07251602666023277, 0.19433200814267076, -0.4648979268844149, -0.4370588520252272,
];
const LSTM_SEQ: &[f64] = &[
    0.1441460877647714, 0.1596098487155145, 0.0864843597235356, 0.15531216787662397,
    0.16282200261032878, 0.07269056156812402,
];
const LSTM_ONE_RELU: &[f64] = &[
    0.05567777163314453, 0.0, 0.034048247355992205, 0.1640486855405026,
    0.19959180862655118, 0.2827619552106964,
];
const POOL2: &[f64] = &[
    0.42073549240394825, 0.45464871341284085, 0.32849329935939453, 0.4946791233116909,
    0.21008351841332046, 0.4953036778474352, 0.3251439200785584, -0.14395165833253265,
];
