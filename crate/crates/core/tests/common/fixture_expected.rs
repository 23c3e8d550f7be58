// Generated by tests/fixtures/oracle.py. Do not edit by hand.
#![allow(clippy::approx_constant)]
pub const COUNTRIES: [&str; 6] = ["ARG", "BOL", "CHN", "COL", "CRI", "ETH"];
pub const PRODUCTS: [&str; 8] = ["0901", "0902", "2605", "2709", "6109", "7108", "8471", "8703"];
pub const YEARS: [i32; 3] = [2008, 2009, 2010];
pub const YEARLY_PPI: [[Option<f64>; 8]; 3] = [
    [Some(0.05389967340227291), Some(0.024), Some(0.13223640087845256), Some(0.09916183722512041), Some(0.0815694773797914), None, Some(0.10201429554397984), Some(0.07467172925260196)],
    [Some(0.05455557921314125), Some(0.06723825658790004), Some(0.128), Some(0.08416152503437337), Some(0.060696588183866626), None, Some(0.08226125941445475), Some(0.0810890868803306)],
    [Some(0.05335125769916965), Some(0.019), Some(0.11799999999999998), Some(0.07738795770651424), Some(0.054433224811510375), None, Some(0.07379149713122855), Some(0.06188082448627104)],
];
pub const YEARLY_E_PRIME: [[f64; 8]; 3] = [
    [0.14592204589154553, 0.1511912533920337, 0.13513153276863563, 0.13752873881974176, 0.14457385276029217, 0.0, 0.1423288141338855, 0.1433237622338658],
    [0.14423088606609177, 0.14502160177717713, 0.1351759971441598, 0.1405424366576722, 0.14684404295749467, 0.0, 0.14453229725783306, 0.14365273813957144],
    [0.14235827297343473, 0.14877980721796116, 0.13547725722916376, 0.13865819948949293, 0.14657333155006522, 0.0, 0.14456453461628466, 0.1435885969235976],
];
pub const YEARLY_IN_COMPONENT: [[bool; 8]; 3] = [
    [true, true, true, true, true, false, true, true],
    [true, true, true, true, true, false, true, true],
    [true, true, true, true, true, false, true, true],
];
pub const YEARLY_EIGENVALUE: [f64; 3] = [0.9206205425551113, 0.924180776870544, 0.9378320818388751];
pub const AVG_PPI: [Option<f64>; 8] = [Some(0.05393550343819461), Some(0.03674608552930002), Some(0.1260788002928175), Some(0.08690377332200268), Some(0.06556643012505613), None, Some(0.08602235069655438), Some(0.07254721353973453)];
pub const AVG_EIGENPOVERTY: [f64; 8] = [0.8558295983563093, 0.8516691125376094, 0.8647384042860136, 0.8610902083443644, 0.8540029242440493, 1.0, 0.8561914513306655, 0.8564783009009883];
pub const PRP_C: [Option<f64>; 6] = [Some(0.9288711699000226), Some(0.8935087131925898), Some(0.9290845931386665), Some(0.9216290527752273), Some(0.9381059897509075), Some(0.9277465369132293)];
pub const EPRP_C: [Option<f64>; 6] = [Some(0.7116312765832038), Some(0.6931471805599453), Some(0.721006396984027), Some(0.7060390882460553), Some(0.724641661812949), Some(0.7130159831115163)];
pub const RH_BASE: [Option<f64>; 6] = [Some(0.7691330875378674), Some(1.9755419466616844), Some(1.9307583440347111), Some(1.6199092123013956), Some(0.6931471805599453), None];
pub const RH_TARGET: [Option<f64>; 6] = [Some(0.6931471805599453), Some(1.7047480922384253), Some(0.0), Some(1.7749523509116738), Some(0.7419373447293771), None];
