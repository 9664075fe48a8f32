//! Hermetic template pools. Every fact here is fictional.

pub(super) const FIRST_NAMES: &[&str] = &[
    "Alina", "Boris", "Clara", "Dmitri", "Elena", "Farid", "Greta", "Hugo", "Ingrid", "Jonas", "Keira", "Lev", "Mira",
    "Nikolai", "Olga", "Pavel", "Quinn", "Rosa", "Stefan", "Tamara", "Umar", "Vera", "Walter", "Xenia", "Yusuf", "Zoe",
    "Anton", "Bianca", "Cyril", "Daria",
];

pub(super) const SURNAMES: &[&str] = &[
    "Abramova",
    "Becker",
    "Castillo",
    "Dorn",
    "Eriksen",
    "Fischer",
    "Gallo",
    "Hartmann",
    "Ivanova",
    "Jansen",
    "Kowalski",
    "Lindqvist",
    "Moreau",
    "Novak",
    "Okafor",
    "Petrov",
    "Quist",
    "Romero",
    "Sorensen",
    "Tanaka",
    "Ulrich",
    "Volkova",
    "Weber",
    "Yilmaz",
    "Zelenko",
    "Arendt",
    "Brandt",
    "Costa",
    "Dufresne",
    "Egorova",
];

pub(super) const SPECIALIZATIONS: &[&str] = &[
    "Cardiologist",
    "Dermatologist",
    "Endocrinologist",
    "Gastroenterologist",
    "Neurologist",
    "Ophthalmologist",
    "Orthopedic Surgeon",
    "Otolaryngologist",
    "Pediatrician",
    "Psychiatrist",
    "Pulmonologist",
    "Rheumatologist",
    "Urologist",
    "Allergist",
    "Oncologist",
    "General Practitioner",
];

pub(super) const CITIES: &[&str] = &[
    "Lisbon",
    "Krakow",
    "Tallinn",
    "Porto",
    "Ghent",
    "Lyon",
    "Graz",
    "Turku",
    "Brno",
    "Bergen",
    "Malmo",
    "Bilbao",
    "Leipzig",
    "Utrecht",
    "Aarhus",
    "Ljubljana",
    "Split",
    "Kaunas",
    "Tartu",
    "Salzburg",
];

pub(super) const DOCTOR_REVIEWS: &[&str] = &[
    "Listened carefully and explained every option without rushing.",
    "The appointment started on time and the follow-up call came the next day.",
    "Very thorough examination, although the waiting room was crowded.",
    "Gave clear written instructions and answered all my questions.",
    "Friendly, calm and precise. I felt safe during the whole procedure.",
    "Booking was difficult, but the consultation itself was excellent.",
    "Recommended a treatment plan that finally worked after years of trouble.",
    "A little brief in conversation, yet the diagnosis was spot on.",
];

pub(super) const TITLE_ADJECTIVES: &[&str] = &[
    "Silent",
    "Crimson",
    "Hollow",
    "Distant",
    "Burning",
    "Frozen",
    "Hidden",
    "Last",
    "Broken",
    "Golden",
    "Quiet",
    "Endless",
    "Paper",
    "Iron",
    "Velvet",
    "Midnight",
    "Northern",
    "Glass",
    "Wandering",
    "Restless",
];

pub(super) const TITLE_NOUNS: &[&str] = &[
    "Harbor", "Orchard", "Signal", "Lantern", "Frontier", "Archive", "Meridian", "Tide", "Garden", "Compass",
    "Station", "Winter", "Bridge", "Mirror", "Circus", "Empire", "River", "Letters", "Summit", "Horizon",
];

pub(super) const COUNTRIES: &[&str] = &[
    "France",
    "Italy",
    "Japan",
    "Mexico",
    "Norway",
    "Poland",
    "South Korea",
    "Spain",
    "Sweden",
    "Argentina",
    "Brazil",
    "Canada",
    "Denmark",
    "Germany",
    "India",
    "Iran",
    "Ireland",
    "New Zealand",
    "Romania",
    "Turkey",
];

pub(super) const MOVIE_REVIEWS: &[&str] = &[
    "The pacing drags in the middle, but the final act is unforgettable.",
    "Beautifully shot, with a score that lingers long after the credits.",
    "A clever script held together by two remarkable lead performances.",
    "Ambitious and uneven, yet impossible to look away from.",
    "Small in scale and enormous in feeling.",
    "The twist is predictable, the characters are not.",
    "A patient film that rewards a second viewing.",
    "Funny, sad and surprisingly tense in equal measure.",
];

pub(super) const ORG_PREFIXES: &[&str] = &[
    "Blue Harbor",
    "Northwind",
    "Cedar Point",
    "Silverline",
    "Old Mill",
    "Bright Path",
    "Greenfield",
    "Stonebridge",
    "Red Maple",
    "Clearwater",
    "Sunrise",
    "Oakridge",
    "Riverbend",
    "Highland",
    "Copperleaf",
    "Westgate",
];

pub(super) const ORG_KINDS: &[&str] = &[
    "Logistics",
    "Dental Clinic",
    "Bakery",
    "Law Office",
    "Print Studio",
    "Language School",
    "Hardware Store",
    "Veterinary Center",
    "Architecture Bureau",
    "Bike Workshop",
    "Coffee Roasters",
    "Tutoring Center",
];

pub(super) const ORG_SUFFIXES: &[&str] = &["LLC", "Ltd", "Group", "& Partners", "Co", "Inc"];

pub(super) const STREETS: &[&str] = &[
    "Maple Street",
    "Harbor Road",
    "Station Square",
    "Linden Avenue",
    "Mill Lane",
    "Church Street",
    "Park Row",
    "Bridge Street",
    "Market Place",
    "Garden Walk",
    "Elm Boulevard",
    "Canal Street",
];

pub(super) const PRODUCT_ADJECTIVES: &[&str] = &[
    "Compact", "Classic", "Everyday", "Trail", "Urban", "Studio", "Coastal", "Alpine", "Nordic", "Heritage", "Minimal",
    "Travel",
];

pub(super) const PRODUCT_NOUNS: &[&str] = &[
    "Backpack",
    "Desk Lamp",
    "Water Bottle",
    "Throw Blanket",
    "Chef Knife",
    "Wall Clock",
    "Side Table",
    "Umbrella",
    "Notebook",
    "Scarf",
    "Tote Bag",
    "Cutting Board",
    "Planter",
    "Headphone Stand",
];

pub(super) const PRODUCT_MODELS: &[&str] = &["One", "Pro", "Lite", "Max", "Mini", "Plus", "S", "X", "Duo", "Air"];

pub(super) const COLORS: &[&str] = &[
    "Black",
    "White",
    "Navy Blue",
    "Forest Green",
    "Burgundy",
    "Sand",
    "Slate Grey",
    "Mustard",
    "Terracotta",
    "Ivory",
    "Teal",
    "Charcoal",
];

pub(super) const MATERIALS: &[&str] = &[
    "Cotton",
    "Oak",
    "Stainless Steel",
    "Recycled Polyester",
    "Leather",
    "Bamboo",
    "Ceramic",
    "Wool",
    "Aluminum",
    "Walnut",
    "Linen",
    "Glass",
];

pub(super) const CATEGORIES: &[&str] = &["Home", "Kitchen", "Outdoor", "Office", "Accessories", "Travel", "Decor"];

pub(super) const PRODUCT_BLURBS: &[&str] = &[
    "Designed for daily use and easy to clean.",
    "Ships flat and assembles in minutes.",
    "A quiet, sturdy piece that fits most interiors.",
    "Lightweight enough to carry all day.",
    "Made in small batches with careful finishing.",
];

/// Built-in filler: short expository paragraphs with no entities of any subset.
pub(super) const FILLER: &[&str] = &[
    "Photosynthesis converts light energy into chemical energy stored in sugars. In most plants the process takes place in the chloroplasts of leaf cells, where chlorophyll absorbs red and blue light and reflects green. Water is split to release oxygen, and carbon dioxide from the air is fixed into organic molecules.",
    "The water cycle describes how water moves between the oceans, the atmosphere and the land. Evaporation lifts vapor into the air, condensation forms clouds, and precipitation returns water to the surface, where it flows through rivers or soaks into groundwater before the cycle repeats.",
    "A fraction names a part of a whole. The denominator tells how many equal parts the whole is divided into, and the numerator tells how many of those parts are being counted. Equivalent fractions describe the same amount, such as one half and two quarters.",
    "Plate tectonics explains why earthquakes and volcanoes cluster along certain lines on the map. The outer shell of the planet is broken into large plates that drift a few centimeters each year, colliding, separating or sliding past one another at their boundaries.",
    "Good study habits rely on spacing and retrieval. Reviewing material several times over a few weeks is more effective than a single long session, and testing yourself on what you remember strengthens memory more than simply rereading notes.",
    "The printing press made books far cheaper to produce. Before movable type, texts were copied by hand, which was slow and expensive. Faster printing spread literacy, allowed scientific results to be shared widely and changed how ideas travelled across regions.",
    "Sound is a vibration that travels through a medium such as air or water. Its pitch depends on the frequency of the vibration and its loudness on the amplitude. Sound cannot travel through a vacuum because there are no particles to carry the wave.",
    "Ecosystems depend on producers, consumers and decomposers. Producers capture energy from sunlight, consumers eat plants or other animals, and decomposers break down dead material so that nutrients return to the soil and can be used again.",
    "A budget compares expected income with planned spending. Listing fixed costs first, then variable costs, makes it easier to see where money goes each month and to set aside savings before discretionary purchases.",
    "The circulatory system moves blood through the body. The heart pumps oxygen-rich blood through arteries to the tissues, and veins carry oxygen-poor blood back to the heart and lungs, where carbon dioxide is released and fresh oxygen is absorbed.",
    "Erosion slowly reshapes landscapes. Wind, rain, ice and moving water carry away small particles of rock and soil, carving valleys, widening rivers and depositing sediment in deltas and on the floors of lakes and seas.",
    "Computer programs are written as sequences of instructions. Variables hold values, conditions choose between alternatives, and loops repeat work until a goal is reached. Breaking a large problem into small functions makes programs easier to test and change.",
];
