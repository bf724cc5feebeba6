#include "parg/synthetic.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace parg {

namespace {

using nlohmann::json;

const std::vector<std::string> kFoods{"italian", "chinese", "indian", "thai", "french", "british", "spanish", "turkish"};
const std::vector<std::string> kAreas{"north", "south", "east", "west", "centre"};
const std::vector<std::string> kPrices{"cheap", "moderate", "expensive"};
const std::vector<std::string> kAdjectives{"golden", "royal", "little", "red", "blue", "silver", "green", "grand",
                                           "old", "happy"};
const std::vector<std::string> kNouns{"dragon", "garden", "lotus", "kitchen", "table", "house", "palace", "bistro"};
const std::vector<std::string> kStreets{"mill", "regent", "hills", "king", "bridge", "station", "castle", "market"};
const std::array<std::string, 3> kConstraintOrder{"food", "area", "pricerange"};
const std::array<std::string, 3> kRequestables{"phone", "address", "postcode"};

std::string digits(Rng& rng, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s.push_back(static_cast<char>('0' + rng.below(10)));
  return s;
}

struct Row {
  std::map<std::string, std::string> f;
};

std::vector<Row> make_database(Rng& rng, int n) {
  std::vector<std::array<std::size_t, 3>> combos;
  for (std::size_t a = 0; a < kFoods.size(); ++a)
    for (std::size_t b = 0; b < kAreas.size(); ++b)
      for (std::size_t c = 0; c < kPrices.size(); ++c) combos.push_back({a, b, c});
  rng.shuffle(combos);
  std::vector<std::string> names;
  for (const auto& a : kAdjectives)
    for (const auto& b : kNouns) names.push_back("the " + a + " " + b);
  rng.shuffle(names);
  const auto count = std::min<std::size_t>({static_cast<std::size_t>(n), combos.size(), names.size()});
  std::vector<Row> db;
  for (std::size_t i = 0; i < count; ++i) {
    Row e;
    e.f["name"] = names[i];
    e.f["food"] = kFoods[combos[i][0]];
    e.f["area"] = kAreas[combos[i][1]];
    e.f["pricerange"] = kPrices[combos[i][2]];
    e.f["phone"] = "01223 " + digits(rng, 6);
    e.f["address"] = std::to_string(1 + rng.below(98)) + " " + rng.pick(kStreets) + " " +
                     (rng.below(2) ? "road" : "street");
    e.f["postcode"] = "cb" + std::to_string(1 + rng.below(4)) + " " + digits(rng, 1) +
                      static_cast<char>('a' + rng.below(26)) + static_cast<char>('a' + rng.below(26));
    db.push_back(std::move(e));
  }
  return db;
}

// Noun phrase describing a restaurant with the given constraints.
std::string describe(Rng& rng, const std::map<std::string, std::string>& c) {
  std::string np = "a";
  const bool price_first = c.count("pricerange") && rng.below(3) != 0;
  const bool food_first = c.count("food") && rng.below(2) == 0;
  if (price_first) np += " " + c.at("pricerange");
  if (food_first) np += " " + c.at("food");
  np += rng.below(4) == 0 ? " place" : " restaurant";
  if (c.count("food") && !food_first) np += " serving " + c.at("food") + " food";
  if (c.count("area")) np += rng.below(2) ? " in the " + c.at("area") : " in the " + c.at("area") + " part of town";
  if (c.count("pricerange") && !price_first) np += " in the " + c.at("pricerange") + " price range";
  return np;
}

std::string search_utterance(Rng& rng, const std::map<std::string, std::string>& c) {
  static const std::vector<std::string> openers{"i am looking for", "i want", "i need", "can you find me",
                                                "could you help me find", "please find me", "i would like"};
  const std::string opener = rng.pick(openers);
  const bool question = opener.rfind("can", 0) == 0 || opener.rfind("could", 0) == 0;
  std::string end = question ? " ?" : (rng.below(2) ? " please ." : " .");
  return opener + " " + describe(rng, c) + end;
}

std::string answer_utterance(Rng& rng, const std::string& slot, const std::string& value,
                             const std::map<std::string, std::string>& all) {
  if (all.size() > 1) {
    static const std::vector<std::string> openers{"i would like", "i want", "i am looking for", "how about"};
    return rng.pick(openers) + " " + describe(rng, all) + " .";
  }
  static const std::map<std::string, std::vector<std::string>> forms{
      {"food",
       {"# food please .", "i would like # food .", "i want # food .", "how about # food ?", "# please .",
        "i am looking for # food .", "something serving # food would be good ."}},
      {"area",
       {"the # please .", "in the # .", "i would like the # part of town .", "somewhere in the # please .", "# .",
        "i want it in the # ."}},
      {"pricerange",
       {"# please .", "something # .", "i want a # restaurant .", "# price range please .",
        "i am looking for something # ."}}};
  std::string s = rng.pick(forms.at(slot));
  s.replace(s.find('#'), 1, value);
  return s;
}

std::string request_utterance(Rng& rng, const std::string& slot) {
  static const std::map<std::string, std::string> words{
      {"phone", "phone number"}, {"address", "address"}, {"postcode", "postcode"}};
  static const std::vector<std::string> forms{"what is the # ?", "can i have the # ?",
                                              "could you give me the # please ?", "may i have their # ?",
                                              "what is their # ?", "i need the # please ."};
  std::string s = rng.pick(forms);
  s.replace(s.find('#'), 1, words.at(slot));
  return s;
}

std::string closing(Rng& rng) {
  static const std::vector<std::string> forms{"thank you , goodbye .", "thanks , bye .", "that is all , thank you .",
                                              "great , thanks . goodbye ."};
  return rng.pick(forms);
}

json act(const std::string& type, const std::string& slot = {}) {
  json a = {{"act", type}, {"domain", "restaurant"}};
  if (!slot.empty()) a["slot"] = slot;
  return a;
}

json state_json(const std::map<std::string, std::string>& informed, const std::vector<std::string>& requested) {
  json s = {{"informed", json::object()}, {"requested", json::object()}};
  if (!informed.empty()) s["informed"]["restaurant"] = informed;
  if (!requested.empty()) s["requested"]["restaurant"] = requested;
  return s;
}

}  // namespace

nlohmann::json synthetic_corpus_json(const SyntheticConfig& cfg) {
  if (cfg.dialogs < 1) throw ValidationError("synthetic corpus needs at least one dialog");
  if (cfg.entities < 1) throw ValidationError("synthetic corpus needs at least one entity");
  Rng db_rng(derive_seed(cfg.database_seed, 1));
  Rng rng(derive_seed(cfg.seed, 2));
  const auto db = make_database(db_rng, cfg.entities);

  json slots;
  slots["food"] = {{"informable", true}, {"requestable", false}, {"values", kFoods}};
  slots["area"] = {{"informable", true}, {"requestable", false}, {"values", kAreas}};
  slots["pricerange"] = {{"informable", true}, {"requestable", false}, {"values", kPrices}};
  for (const std::string s : {"name", "phone", "address", "postcode"})
    slots[s] = {{"informable", false}, {"requestable", true}, {"values", json::array()}};
  json doc;
  doc["ontology"] = {{"domains", {{"restaurant", {{"slots", slots}}}}}, {"act_types", {"bye", "inform", "request"}}};
  doc["database"] = json::array();
  for (const auto& e : db) {
    json row = e.f;
    row["domain"] = "restaurant";
    doc["database"].push_back(row);
  }

  static const std::map<std::string, std::string> asks{{"food", "what type of food would you like ?"},
                                                       {"area", "what area would you like ?"},
                                                       {"pricerange", "what price range would you like ?"}};
  static const std::map<std::string, std::string> answers{{"phone", "the phone number is # ."},
                                                          {"address", "the address is # ."},
                                                          {"postcode", "the postcode is # ."}};

  doc["dialogs"] = json::array();
  for (int d = 0; d < cfg.dialogs; ++d) {
    const Row& target = db[static_cast<std::size_t>(rng.below(db.size()))];
    std::map<std::string, std::string> goal;
    for (const auto& s : kConstraintOrder) goal[s] = target.f.at(s);
    std::vector<std::string> requests(kRequestables.begin(), kRequestables.end());
    rng.shuffle(requests);
    requests.resize(static_cast<std::size_t>(rng.below(3)));

    json turns = json::array();
    std::map<std::string, std::string> informed;
    auto push = [&](const std::string& user, const std::vector<std::string>& requested, json acts,
                    const std::string& response) {
      turns.push_back({{"t", static_cast<int>(turns.size()) + 1},
                       {"user", user},
                       {"state", state_json(informed, requested)},
                       {"sys_acts", std::move(acts)},
                       {"response", response},
                       {"domain", "restaurant"}});
    };
    auto system_move = [&](std::string& response) {
      for (const auto& s : kConstraintOrder)
        if (!informed.count(s)) {
          response = asks.at(s);
          return json::array({act("request", s)});
        }
      response = target.f.at("name") + " is a " + target.f.at("pricerange") + " restaurant in the " +
                 target.f.at("area") + " serving " + target.f.at("food") + " food .";
      return json::array({act("inform", "name")});
    };

    std::map<std::string, std::string> first;
    for (const auto& s : kConstraintOrder)
      if (rng.below(2)) first[s] = goal[s];
    if (first.empty()) {
      const auto& s = kConstraintOrder[static_cast<std::size_t>(rng.below(3))];
      first[s] = goal[s];
    }
    informed = first;
    std::string response;
    json acts = system_move(response);
    push(search_utterance(rng, first), {}, acts, response);

    while (informed.size() < kConstraintOrder.size()) {
      std::string asked;
      for (const auto& s : kConstraintOrder)
        if (!informed.count(s)) {
          asked = s;
          break;
        }
      std::map<std::string, std::string> mention{{asked, goal[asked]}};
      if (rng.below(10) < 3)
        for (const auto& s : kConstraintOrder)
          if (!informed.count(s) && s != asked) {
            mention[s] = goal[s];
            break;
          }
      const std::string user = answer_utterance(rng, asked, goal[asked], mention);
      informed.insert(mention.begin(), mention.end());
      acts = system_move(response);
      push(user, {}, acts, response);
    }

    for (const auto& r : requests) {
      std::string resp = answers.at(r);
      resp.replace(resp.find('#'), 1, target.f.at(r));
      push(request_utterance(rng, r), {r}, json::array({act("inform", r)}), resp);
    }
    push(closing(rng), {}, json::array({act("bye")}), "goodbye , have a nice day .");

    json goal_json = state_json(goal, requests);
    std::string id = std::to_string(d);
    id = cfg.id_prefix + "-" + std::string(id.size() < 4 ? 4 - id.size() : 0, '0') + id;
    doc["dialogs"].push_back({{"id", id}, {"goal", goal_json}, {"turns", turns}});
  }
  return doc;
}

Corpus synthetic_corpus(const SyntheticConfig& cfg) { return parse_canonical(synthetic_corpus_json(cfg)); }

}  // namespace parg
