#include "taskemb/failure_cases.hpp"

#include "taskemb/common.hpp"
#include "taskemb/data.hpp"
#include "taskemb/text.hpp"

#include <array>
#include <stdexcept>

namespace taskemb {

namespace {

struct Animal {
  const char* name;
  const char* alias;
};

constexpr std::array<Animal, 10> kAnimals{{{"fox", "vixen"},
                                           {"owl", "nocturnal raptor"},
                                           {"badger", "brock"},
                                           {"otter", "river mustelid"},
                                           {"heron", "wading bird"},
                                           {"lynx", "wild cat"},
                                           {"beaver", "dam builder"},
                                           {"hare", "long eared runner"},
                                           {"salmon", "river fish"},
                                           {"bison", "plains grazer"}}};

struct Activity {
  const char* verb;
  const char* paraphrase;
};

constexpr std::array<Activity, 4> kActivities{{{"sleep", "rests"},
                                               {"hunt", "catches prey"},
                                               {"hide", "takes cover"},
                                               {"travel", "migrates"}}};

struct Season {
  const char* name;
  const char* alias;
};

constexpr std::array<Season, 4> kSeasons{{{"winter", "cold months"},
                                          {"summer", "hot months"},
                                          {"spring", "thaw"},
                                          {"autumn", "harvest time"}}};

constexpr std::array<const char*, 6> kPlaces{"burrow", "cave", "hollow log", "riverbank", "meadow", "pine forest"};

constexpr std::array<const char*, 12> kNameTokens{"sofia", "albert", "stone", "grace", "hunter", "rose",
                                                  "mason", "jordan", "taylor", "morgan", "carter", "hope"};

constexpr std::array<const char*, 8> kProfessions{"painter", "surgeon", "pilot", "chemist",
                                                  "architect", "novelist", "judge", "violinist"};

constexpr std::array<const char*, 8> kCities{"lisbon", "oslo", "dublin", "vienna", "quito", "hanoi", "perth", "lagos"};

struct PolarTopic {
  const char* item;
  const char* property;
  const char* group;
};

constexpr std::array<PolarTopic, 8> kPolarTopics{{{"herbal tea", "safe", "children"},
                                                  {"old bridge", "open", "cyclists"},
                                                  {"new vaccine", "approved", "adults"},
                                                  {"river water", "drinkable", "hikers"},
                                                  {"mountain trail", "suitable", "beginners"},
                                                  {"city museum", "free", "students"},
                                                  {"night train", "available", "tourists"},
                                                  {"spicy sauce", "vegan", "guests"}}};

template <typename T, std::size_t N>
const T& pick(const std::array<T, N>& bank, Rng& rng) {
  return bank[rng.index(N)];
}

std::string join(std::initializer_list<std::string> parts) {
  std::string out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += p;
  }
  return out;
}

FailureRecord make_f1(Rng& rng) {
  const Animal& a = pick(kAnimals, rng);
  Animal other = pick(kAnimals, rng);
  while (std::string(other.name) == a.name) other = pick(kAnimals, rng);
  const Activity& act = pick(kActivities, rng);
  Activity other_act = pick(kActivities, rng);
  while (std::string(other_act.verb) == act.verb) other_act = pick(kActivities, rng);
  const Season& s = pick(kSeasons, rng);
  const std::string an = a.name, v = act.verb, sn = s.name;

  FailureRecord r;
  r.kind = "f1";
  r.query = join({"where", "does", "the", an, v, "during", "the", sn});
  r.gold = join({"this", a.alias, act.paraphrase, "in", "a", pick(kPlaces, rng), "through", "the", s.alias});
  r.distractors = {
      join({"where", "does", "the", an, v, "during", "the", sn, "nobody", "really", "knows"}),
      join({"the", an, "does", v, "during", "the", sn, "somewhere"}),
      join({"during", "the", sn, "where", "does", "the", an, "go", "to", v}),
      join({"people", "often", "ask", "where", "the", an, "does", v, "during", "the", sn}),
      join({"where", "does", "the", other.name, v, "during", "the", sn}),
      join({"does", "the", an, v, "during", "the", sn, "or", "not"}),
      join({"where", "does", "the", an, other_act.verb, "during", "the", sn}),
  };
  return r;
}

FailureRecord make_f2(Rng& rng) {
  std::vector<std::string> names(kNameTokens.begin(), kNameTokens.end());
  rng.shuffle(names);
  const std::string first = names[0], last = names[1];
  const std::string prof = pick(kProfessions, rng), city = pick(kCities, rng);
  auto other_prof = [&] {
    std::string p = pick(kProfessions, rng);
    while (p == prof) p = pick(kProfessions, rng);
    return p;
  };
  auto other_city = [&] { return std::string(pick(kCities, rng)); };

  FailureRecord r;
  r.kind = "f2";
  r.query = join({"what", "does", first, last, "do", "for", "a", "living"});
  r.gold = join({first, last, "works", "as", "a", prof, "in", city});
  r.distractors = {
      join({last, names[2], "works", "as", "a", other_prof(), "in", other_city()}),
      join({names[3], first, "works", "as", "a", other_prof(), "in", other_city()}),
      join({first, names[4], "works", "as", "a", other_prof(), "in", other_city()}),
      join({names[5], last, "works", "as", "a", other_prof(), "in", other_city()}),
      join({"the", first, "company", "hired", "a", other_prof(), "in", other_city()}),
      join({last, "street", "is", "home", "to", "a", other_prof(), "in", other_city()}),
      join({names[6], names[7], "works", "as", "a", prof, "in", city}),
  };
  return r;
}

FailureRecord make_f3(Rng& rng) {
  const PolarTopic& t = pick(kPolarTopics, rng);
  const bool yes = rng.bernoulli(0.5);
  const std::string item = t.item, prop = t.property, group = t.group;

  FailureRecord r;
  r.kind = "f3";
  r.query = join({"is", "the", item, prop, "for", group});
  r.gold = yes ? join({"yes", "the", item, "is", prop, "for", group, "according", "to", "official", "guidance"})
               : join({"no", "the", item, "is", "not", prop, "for", group, "according", "to", "official", "guidance"});
  r.distractors = {
      join({"the", item, "was", "discussed", "by", group, "last", "year"}),
      join({"many", group, "have", "asked", "about", "the", item}),
      join({"questions", "about", "the", item, "and", group, "are", "common"}),
      join({"the", item, "has", "a", "long", "history", "among", group}),
      join({"a", "report", "on", "the", item, "mentions", group}),
      join({"whether", "the", item, "is", prop, "is", "a", "popular", "topic"}),
      join({"the", item, "and", "its", "use", "by", group, "were", "reviewed"}),
  };
  return r;
}

void check_f1(const FailureRecord& r) {
  double mean = 0.0;
  for (const auto& d : r.distractors) mean += word_overlap(r.query, d);
  mean /= static_cast<double>(r.distractors.size());
  if (!(mean > word_overlap(r.query, r.gold))) throw std::logic_error("F1 template produced a non-misleading record");
}

}  // namespace

std::string to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::F1: return "f1";
    case FailureKind::F2: return "f2";
    case FailureKind::F3: return "f3";
    case FailureKind::F4: return "f4";
  }
  return "f1";
}

FailureKind parse_failure_kind(std::string_view name) {
  const std::string n = lowercase(name);
  if (n == "f1") return FailureKind::F1;
  if (n == "f2") return FailureKind::F2;
  if (n == "f3") return FailureKind::F3;
  if (n == "f4") return FailureKind::F4;
  throw std::invalid_argument("unknown failure case '" + std::string(name) + "'; valid: f1, f2, f3, f4");
}

std::vector<FailureRecord> gen_failure_case(FailureKind kind, std::size_t n, Rng& rng) {
  std::vector<FailureRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case FailureKind::F1:
        out.push_back(make_f1(rng));
        check_f1(out.back());
        break;
      case FailureKind::F2: out.push_back(make_f2(rng)); break;
      case FailureKind::F3: out.push_back(make_f3(rng)); break;
      case FailureKind::F4:
        throw std::invalid_argument("f4 records are converted from quality threads, not generated");
    }
  }
  return out;
}

std::vector<FailureRecord> failure_records_from_tuples(const std::vector<TupleRecord>& tuples, FailureKind kind) {
  std::vector<FailureRecord> out;
  for (const auto& t : tuples) {
    if (t.negatives.size() != kTupleNegatives) {
      throw DataError("failure tuples need exactly " + std::to_string(kTupleNegatives) + " negatives");
    }
    out.push_back({to_string(kind), t.q, t.p, t.negatives});
  }
  return out;
}

std::vector<TupleRecord> failure_records_to_tuples(const std::vector<FailureRecord>& records, const std::string& dataset) {
  std::vector<TupleRecord> out;
  for (const auto& r : records) out.push_back({r.query, r.gold, r.distractors, dataset});
  return out;
}

}  // namespace taskemb
