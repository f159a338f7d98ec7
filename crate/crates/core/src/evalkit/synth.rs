use chrono::{Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{EntitySpan, EntityTag, HelpLabel, LabeledTweet, Tweet};
use crate::error::{Error, Result};

/// Provinces hit by the February 2023 earthquakes, with approximate centres.
pub const AFFECTED_CITIES: [(&str, f64, f64); 11] = [
    ("Kahramanmaraş", 37.58, 36.94),
    ("Hatay", 36.20, 36.16),
    ("Gaziantep", 37.07, 37.38),
    ("Malatya", 38.35, 38.31),
    ("Adıyaman", 37.76, 38.28),
    ("Osmaniye", 37.07, 36.25),
    ("Şanlıurfa", 37.16, 38.79),
    ("Diyarbakır", 37.91, 40.24),
    ("Adana", 37.00, 35.32),
    ("Kilis", 36.72, 37.12),
    ("Elazığ", 38.67, 39.22),
];

/// A district far outside the zone whose street names also occur inside it.
const OUT_OF_ZONE: (&str, f64, f64) = ("Kadıköy", 40.99, 29.03);

const FIRST: [&str; 16] = [
    "Ali", "Ayşe", "Mehmet", "Fatma", "Mustafa", "Zeynep", "Hüseyin", "Elif", "Emre", "Hatice",
    "İbrahim", "Esra", "Ahmet", "Merve", "Yusuf", "Hacer",
];
const LAST: [&str; 12] = [
    "Yılmaz", "Demir", "Kaya", "Çelik", "Şahin", "Arslan", "Doğan", "Aydın", "Öztürk", "Koç",
    "Kurt", "Yıldız",
];
const STATUS: [&str; 10] = [
    "enkaz altında",
    "enkaz altındalar",
    "ses geliyor",
    "yaralı",
    "mahsur kaldı",
    "ulaşılamıyor",
    "kayıp",
    "su ve gıda lazım",
    "çadır ihtiyacı var",
    "acil vinç lazım",
];
const MAH: [&str; 10] = [
    "Cumhuriyet", "Atatürk", "İnönü", "Gazi", "Yeni", "Fatih", "Saray", "Kurtuluş", "Barbaros", "Hürriyet",
];
const STREET: [&str; 10] = [
    "Atatürk", "İstiklal", "Gazi", "Cumhuriyet", "Kıbrıs", "Fevzi Çakmak", "Mimar Sinan", "Güllü",
    "Yavuz Selim", "Ordu",
];
const STREET_TYPE: [&str; 5] = ["Cad.", "Sok.", "Caddesi", "Sokak", "Bulvarı"];
const BUILDING: [&str; 6] = ["Yıldız", "Gül", "Umut", "Deniz", "Bahar", "Sevgi"];
const OOZ_STREET: [&str; 3] = ["Moda", "Bağdat", "Bahariye"];

struct Builder {
    text: String,
    chars: usize,
    spans: Vec<EntitySpan>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            text: String::new(),
            chars: 0,
            spans: Vec::new(),
        }
    }

    fn push(&mut self, s: &str, sep: bool) -> (usize, usize) {
        if sep && !self.text.is_empty() {
            self.text.push(' ');
            self.chars += 1;
        }
        let start = self.chars;
        self.text.push_str(s);
        self.chars += s.chars().count();
        (start, self.chars)
    }

    fn lit(&mut self, s: &str) -> &mut Self {
        self.push(s, true);
        self
    }

    /// Appended without a separating space.
    fn glue(&mut self, s: &str) -> &mut Self {
        self.push(s, false);
        self
    }

    fn ent(&mut self, tag: EntityTag, s: &str) -> &mut Self {
        let (start, end) = self.push(s, true);
        self.spans.push(EntitySpan {
            tag,
            start,
            end,
            surface: s.to_string(),
        });
        self
    }
}

fn person(rng: &mut ChaCha8Rng) -> String {
    let first = *FIRST.choose(rng).unwrap();
    if rng.random_bool(0.2) {
        first.to_string()
    } else {
        format!("{first} {}", LAST.choose(rng).unwrap())
    }
}

fn city(rng: &mut ChaCha8Rng) -> String {
    let name = AFFECTED_CITIES.choose(rng).unwrap().0;
    let r: f64 = rng.random();
    if r < 0.15 {
        crate::textfeat::turkish_lower(name)
    } else if r < 0.25 {
        crate::textfeat::turkish_upper(name)
    } else if r < 0.30 {
        // a transposition typo in the middle of the word
        let mut c: Vec<char> = name.chars().collect();
        let i = c.len() / 2;
        c.swap(i - 1, i);
        c.into_iter().collect()
    } else {
        name.to_string()
    }
}

fn address(rng: &mut ChaCha8Rng) -> String {
    let mah = MAH.choose(rng).unwrap();
    let street = STREET.choose(rng).unwrap();
    let ty = STREET_TYPE.choose(rng).unwrap();
    let n: u32 = rng.random_range(1..80);
    match rng.random_range(0..5) {
        0 => format!("{mah} Mah. {street} {ty} no:{n}"),
        1 => format!("{street} {ty} no:{n}"),
        2 => format!("{mah} Mahallesi {}. Sokak No:{n}", rng.random_range(100..400)),
        3 => format!("{street} {ty} {n}/{}", rng.random_range(1..12)),
        _ => format!(
            "{mah} Mah. {street} {ty} {} Apt. kat {}",
            BUILDING.choose(rng).unwrap(),
            rng.random_range(1..9)
        ),
    }
}

fn ooz_address(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{} Cad. no:{} {}",
        OOZ_STREET.choose(rng).unwrap(),
        rng.random_range(1..80),
        OUT_OF_ZONE.0
    )
}

fn status(rng: &mut ChaCha8Rng) -> &'static str {
    STATUS.choose(rng).unwrap()
}

const POSITIVE_TEMPLATES: usize = 8;
const NEGATIVE_TEMPLATES: usize = 10;

fn positive(template: usize, rng: &mut ChaCha8Rng) -> Builder {
    use EntityTag::*;
    let mut b = Builder::new();
    match template {
        0 => b
            .ent(Per, &person(rng))
            .ent(Status, status(rng))
            .lit("adres:")
            .ent(Addr, &address(rng))
            .ent(City, &city(rng))
            .lit("lütfen yardım edin"),
        1 => b
            .lit("ACİL!")
            .ent(City, &city(rng))
            .ent(Addr, &address(rng))
            .ent(Per, &person(rng))
            .ent(Status, status(rng))
            .lit("#deprem"),
        2 => b
            .ent(City, &city(rng))
            .ent(Addr, &address(rng))
            .lit("adresinde")
            .ent(Status, status(rng))
            .glue(",")
            .lit("isim")
            .ent(Per, &person(rng))
            .lit("lütfen paylaşın"),
        3 => b
            .ent(Per, &person(rng))
            .ent(Status, status(rng))
            .ent(City, &city(rng))
            .lit("yardım edin"),
        4 => b
            .ent(Per, &person(rng))
            .lit("ve ailesi")
            .ent(Status, status(rng))
            .glue(",")
            .lit("haber alamıyoruz lütfen yardım"),
        5 => b
            .ent(Addr, &address(rng))
            .ent(City, &city(rng))
            .ent(Status, status(rng))
            .ent(Per, &person(rng))
            .lit("için ekip lazım"),
        6 => b
            .ent(Per, &person(rng))
            .ent(Status, status(rng))
            .lit("adres")
            .ent(Addr, &ooz_address(rng)),
        _ => b
            .lit("LÜTFEN RT")
            .ent(Per, &person(rng))
            .ent(Status, status(rng))
            .ent(Addr, &address(rng))
            .lit("acil yardım"),
    };
    b
}

fn negative(template: usize, rng: &mut ChaCha8Rng) -> Builder {
    let mut b = Builder::new();
    let c = AFFECTED_CITIES.choose(rng).unwrap().0;
    match template {
        0 => b.lit(c).lit("depreminde son durum açıklandı"),
        1 => b.lit("deprem bölgesine yardım tırları yola çıktı"),
        2 => b.lit("AFAD açıklama yaptı, artçı sarsıntılar sürüyor"),
        3 => b.lit(c).lit("için bağış kampanyası başlatıldı, destek olalım"),
        4 => b.lit("geçmiş olsun Türkiye,").lit(c).lit("ve çevresi için dua ediyoruz"),
        5 => b.lit(&person(rng)).lit("deprem hakkında açıklama yaptı"),
        6 => b
            .lit("deprem")
            .lit(&format!("{}.{}", rng.random_range(4..8), rng.random_range(0..10)))
            .lit("büyüklüğünde ölçüldü"),
        7 => b.lit("yardım kolileri").lit(c).lit("merkezde dağıtılıyor"),
        8 => b.lit("kan bağışı için Kızılay şubelerine gidebilirsiniz"),
        _ => b.lit("enkaz kaldırma çalışmaları").lit(c).lit("genelinde devam ediyor"),
    };
    b
}

/// Template-generated labeled tweets, about 42% calls for help.
///
/// Every template is used at least once; `n` must be at least 20.
pub fn generate_synthetic_corpus(n: usize, seed: u64) -> Result<Vec<LabeledTweet>> {
    let n_pos = (n as f64 * 0.42).round() as usize;
    let n_neg = n.saturating_sub(n_pos);
    if n < 20 || n_pos < POSITIVE_TEMPLATES || n_neg < NEGATIVE_TEMPLATES {
        return Err(Error::invalid(format!(
            "corpus size {n} cannot cover all templates (need >= 20)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drafts: Vec<(HelpLabel, Builder)> = Vec::with_capacity(n);
    for i in 0..n_pos {
        drafts.push((HelpLabel::CallForHelp, positive(i % POSITIVE_TEMPLATES, &mut rng)));
    }
    for i in 0..n_neg {
        drafts.push((HelpLabel::NotCallForHelp, negative(i % NEGATIVE_TEMPLATES, &mut rng)));
    }
    drafts.shuffle(&mut rng);

    let base = Utc.with_ymd_and_hms(2023, 2, 6, 1, 17, 32).unwrap();
    Ok(drafts
        .into_iter()
        .enumerate()
        .map(|(i, (label, b))| LabeledTweet {
            tweet: Tweet {
                id: format!("syn-{seed}-{i:05}"),
                text: b.text,
                created_at: base + Duration::seconds(37 * i as i64),
                author: None,
            },
            label,
            spans: if label.is_positive() { b.spans } else { Vec::new() },
        })
        .collect())
}

/// Mock geocoder table for the synthetic data: affected city centres plus
/// one out-of-zone district. Intended for suffix matching.
pub fn demo_geocoder_table() -> Vec<(String, crate::geoloc::GeoPoint)> {
    AFFECTED_CITIES
        .iter()
        .chain(std::iter::once(&OUT_OF_ZONE))
        .map(|&(name, lat, lon)| (name.to_string(), crate::geoloc::GeoPoint { lat, lon }))
        .collect()
}
