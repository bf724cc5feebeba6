#include <algorithm>
#include <fstream>

#include "parg/corpus.hpp"
#include "parg/log.hpp"

namespace parg {

using nlohmann::json;

RawSchema parse_raw_schema(std::string_view id) {
  if (id == "camrest-raw") return RawSchema::camrest;
  if (id == "multiwoz-raw") return RawSchema::multiwoz;
  throw ValidationError("unknown raw schema '" + std::string(id) + "' (expected camrest-raw or multiwoz-raw)");
}

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct SkipTurn {
  std::string why;
};

// Accumulates a canonical document while tracking which slots/values were seen.
struct CanonicalBuilder {
  json ontology_domains = json::object();
  std::set<std::string> act_types;
  json database = json::array();
  json dialogs = json::array();

  void slot(const std::string& domain, const std::string& slot, bool informable, bool requestable) {
    auto& sj = ontology_domains[domain]["slots"][slot];
    if (!sj.is_object()) sj = json::object();
    sj["informable"] = sj.value("informable", false) || informable;
    sj["requestable"] = sj.value("requestable", false) || requestable;
  }

  void value(const std::string& domain, const std::string& slot, const std::string& v) {
    if (join(tokenize(v)).empty()) return;
    auto& vals = ontology_domains[domain]["slots"][slot]["values"];
    if (std::find(vals.begin(), vals.end(), v) == vals.end()) vals.push_back(v);
  }

  void domain(const std::string& d) {
    if (!ontology_domains.contains(d)) ontology_domains[d] = {{"slots", json::object()}};
  }

  json document() const {
    return {{"ontology", {{"domains", ontology_domains}, {"act_types", act_types}}},
            {"database", database},
            {"dialogs", dialogs}};
  }
};

// ---------------------------------------------------------------- CamRest676

Conversion convert_camrest(const std::filesystem::path& path) {
  ConversionLog log;
  CanonicalBuilder b;
  const std::string domain = "restaurant";
  b.domain(domain);
  b.act_types = {"inform", "request"};
  b.slot(domain, "name", false, true);

  const auto dir = path.parent_path();
  const auto otgy_path = dir / "CamRestOTGY.json";
  const auto db_path = dir / "CamRestDB.json";
  std::set<std::string> informable;
  if (std::filesystem::exists(otgy_path)) {
    const json otgy = read_json(otgy_path);
    for (const auto& [slot, vals] : otgy.at("informable").items()) {
      informable.insert(slot);
      b.slot(domain, slot, true, false);
      for (const auto& v : vals) b.value(domain, slot, v.get<std::string>());
    }
    if (otgy.contains("requestable"))
      for (const auto& s : otgy.at("requestable")) b.slot(domain, s.get<std::string>(), false, true);
  } else {
    log.warnings.push_back("CamRestOTGY.json not found; ontology derived from annotations");
  }

  if (std::filesystem::exists(db_path)) {
    bool dropped = false;
    for (const auto& ej : read_json(db_path)) {
      json rec = {{"domain", domain}};
      for (const auto& [k, v] : ej.items()) {
        if (v.is_string()) rec[k] = v;
        else dropped = true;
      }
      b.database.push_back(rec);
    }
    if (dropped) log.warnings.push_back("database: non-string fields (location, id) dropped");
  } else {
    log.warnings.push_back("CamRestDB.json not found; database left empty");
  }

  const json raw = read_json(path);
  if (!raw.is_array()) throw SchemaError("camrest-raw: top level must be an array of dialogs");
  bool dropped_goal_text = false;

  for (const auto& dj : raw) {
    ++log.dialogs;
    const std::string id = dj.contains("dialogue_id") ? "camrest-" + dj.at("dialogue_id").dump() : "camrest-" + std::to_string(log.dialogs);
    json goal = {{"informed", json::object()}, {"requested", json::object()}};
    if (dj.contains("goal")) {
      const auto& g = dj.at("goal");
      for (const auto& c : g.value("constraint", json::array())) {
        if (c.is_array() && c.size() == 2) {
          goal["informed"][domain][c[0].get<std::string>()] = c[1].get<std::string>();
          b.slot(domain, c[0].get<std::string>(), true, false);
        }
      }
      for (const auto& r : g.value("request", json::array())) {
        goal["requested"][domain].push_back(r.get<std::string>());
        b.slot(domain, r.get<std::string>(), false, true);
      }
      if (g.contains("text")) dropped_goal_text = true;
    }

    json informed = json::object();
    json turns = json::array();
    for (const auto& tj : dj.value("dial", json::array())) {
      ++log.turns;
      try {
        const auto& usr = tj.at("usr");
        const auto& sys = tj.at("sys");
        json turn_informed = informed;
        json requested = json::array();
        const auto& slu = usr.value("slu", json::array());
        if (!slu.is_array()) throw SkipTurn{"slu is not a list"};
        for (const auto& act : slu) {
          if (!act.is_object() || !act.contains("act") || !act.contains("slots") || !act.at("slots").is_array())
            throw SkipTurn{"malformed slu entry " + act.dump()};
          const std::string kind = act.at("act").get<std::string>();
          for (const auto& sv : act.at("slots")) {
            if (!sv.is_array() || sv.size() != 2 || !sv[0].is_string() || !sv[1].is_string())
              throw SkipTurn{"malformed slot pair " + sv.dump()};
            if (kind == "inform") {
              const auto slot = sv[0].get<std::string>(), value = sv[1].get<std::string>();
              b.slot(domain, slot, true, false);
              turn_informed[slot] = value;
              if (!informable.count(slot) && value != "dontcare") b.value(domain, slot, value);
            } else if (kind == "request") {
              const auto slot = sv[1].get<std::string>();
              b.slot(domain, slot, false, true);
              requested.push_back(slot);
            } else {
              throw SkipTurn{"unknown user act '" + kind + "'"};
            }
          }
        }
        json acts = json::array();
        const auto& da = sys.value("DA", json::array());
        if (!da.is_array()) throw SkipTurn{"DA is not a list"};
        for (const auto& s : da) {
          if (!s.is_string()) throw SkipTurn{"malformed DA entry " + s.dump()};
          const auto slot = s.get<std::string>();
          const bool is_request = informable.count(slot) && !turn_informed.contains(slot);
          b.slot(domain, slot, false, !is_request);
          acts.push_back({{"act", is_request ? "request" : "inform"}, {"domain", domain}, {"slot", slot}});
        }
        informed = turn_informed;
        json state = {{"informed", json::object()}, {"requested", json::object()}};
        if (!informed.empty()) state["informed"][domain] = informed;
        if (!requested.empty()) state["requested"][domain] = requested;
        turns.push_back({{"t", static_cast<int>(turns.size()) + 1},
                         {"user", usr.value("transcript", "")},
                         {"state", state},
                         {"sys_acts", acts},
                         {"response", sys.value("sent", "")},
                         {"domain", domain}});
      } catch (const SkipTurn& s) {
        ++log.skipped_turns;
        log.warnings.push_back("dialog " + id + ": turn skipped (" + s.why + ")");
      } catch (const json::exception& e) {
        ++log.skipped_turns;
        log.warnings.push_back("dialog " + id + ": turn skipped (" + e.what() + ")");
      }
    }
    b.dialogs.push_back({{"id", id}, {"goal", goal}, {"turns", turns}});
  }
  if (dropped_goal_text) log.warnings.push_back("goal.text dropped");
  return {parse_canonical(b.document()), log};
}

// ---------------------------------------------------------------- MultiWOZ

const std::map<std::string, std::string>& slot_aliases() {
  static const std::map<std::string, std::string> m = {
      {"addr", "address"}, {"post", "postcode"},  {"price", "pricerange"}, {"leaveat", "leave"},
      {"arriveby", "arrive"}, {"dest", "destination"}, {"depart", "departure"}, {"ref", "reference"},
  };
  return m;
}

std::string norm_slot(const std::string& raw) {
  auto s = lower(raw);
  s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
  auto it = slot_aliases().find(s);
  return it == slot_aliases().end() ? s : it->second;
}

bool empty_value(const std::string& v) {
  return v.empty() || v == "not mentioned" || v == "none";
}

struct ParsedAct {
  std::string domain, act;
  std::optional<std::string> slot;
  std::string value;
};

std::vector<ParsedAct> parse_acts(const json& da) {
  std::vector<ParsedAct> out;
  if (da.is_null()) return out;
  if (!da.is_object()) throw SkipTurn{"dialog_act is not an object"};
  for (const auto& [name, pairs] : da.items()) {
    auto dash = name.find('-');
    if (dash == std::string::npos) throw SkipTurn{"act name without domain: '" + name + "'"};
    const std::string domain = lower(name.substr(0, dash));
    const std::string act = lower(name.substr(dash + 1));
    if (!pairs.is_array()) throw SkipTurn{"act '" + name + "' has no slot list"};
    for (const auto& p : pairs) {
      if (!p.is_array() || p.size() != 2) throw SkipTurn{"malformed slot pair in '" + name + "'"};
      ParsedAct a{domain, act, std::nullopt, p[1].is_string() ? p[1].get<std::string>() : p[1].dump()};
      const std::string slot = p[0].is_string() ? norm_slot(p[0].get<std::string>()) : std::string("none");
      if (slot != "none" && !slot.empty()) a.slot = slot;
      out.push_back(std::move(a));
    }
  }
  return out;
}

Conversion convert_multiwoz(const std::filesystem::path& path) {
  ConversionLog log;
  CanonicalBuilder b;
  const json raw = read_json(path);
  if (!raw.is_object()) throw SchemaError("multiwoz-raw: top level must map dialog ids to dialogs");
  log.warnings.push_back("database: not part of the raw dialog file; left empty");
  bool dropped_book = false;

  for (const auto& [id, dj] : raw.items()) {
    ++log.dialogs;
    json goal = {{"informed", json::object()}, {"requested", json::object()}};
    const json goals = dj.value("goal", json::object());
    for (const auto& [domain, gj] : goals.items()) {
      if (!gj.is_object() || gj.empty()) continue;
      b.domain(domain);
      const json info = gj.value("info", json::object());
      for (const auto& [slot, value] : info.items()) {
        const auto s = norm_slot(slot);
        b.slot(domain, s, true, false);
        goal["informed"][domain][s] = value.is_string() ? value.get<std::string>() : value.dump();
      }
      for (const auto& slot : gj.value("reqt", json::array())) {
        const auto s = norm_slot(slot.get<std::string>());
        b.slot(domain, s, false, true);
        goal["requested"][domain].push_back(s);
      }
      if (gj.contains("book") || gj.contains("fail_info")) dropped_book = true;
    }

    const auto& entries = dj.value("log", json::array());
    json turns = json::array();
    std::string last_domain = "general";
    for (std::size_t i = 0; i + 1 < entries.size(); i += 2) {
      ++log.turns;
      const auto& usr = entries[i];
      const auto& sys = entries[i + 1];
      try {
        const auto user_acts = parse_acts(usr.value("dialog_act", json()));
        const auto sys_acts_raw = parse_acts(sys.value("dialog_act", json()));
        json informed = json::object();
        std::string changed_domain;
        const json metadata = sys.value("metadata", json::object());
        for (const auto& [domain, dm] : metadata.items()) {
          if (!dm.is_object()) continue;
          const json semi = dm.value("semi", json::object());
          for (const auto& [slot, value] : semi.items()) {
            if (!value.is_string() || empty_value(value.get<std::string>())) continue;
            const auto s = norm_slot(slot);
            b.domain(domain);
            b.slot(domain, s, true, false);
            b.value(domain, s, value.get<std::string>());
            informed[domain][s] = value.get<std::string>();
          }
        }
        json requested = json::object();
        std::string domain;
        for (const auto& a : user_acts) {
          if (a.domain != "general" && domain.empty()) domain = a.domain;
          if (a.act == "request" && a.slot) {
            b.domain(a.domain);
            b.slot(a.domain, *a.slot, false, true);
            requested[a.domain].push_back(*a.slot);
          }
        }
        if (domain.empty()) {
          for (const auto& a : sys_acts_raw)
            if (a.domain != "general") {
              domain = a.domain;
              break;
            }
        }
        if (domain.empty()) domain = last_domain;
        last_domain = domain;
        b.domain(domain);

        json acts = json::array();
        for (const auto& a : sys_acts_raw) {
          b.domain(a.domain);
          b.act_types.insert(a.act);
          json aj = {{"act", a.act}, {"domain", a.domain}};
          if (a.slot) {
            b.slot(a.domain, *a.slot, false, true);
            aj["slot"] = *a.slot;
            if (a.act == "inform" && !empty_value(a.value) && a.value != "?") b.value(a.domain, *a.slot, a.value);
          }
          acts.push_back(aj);
        }
        for (const auto& a : user_acts) b.act_types.insert(a.act);
        turns.push_back({{"t", static_cast<int>(turns.size()) + 1},
                         {"user", usr.value("text", "")},
                         {"state", {{"informed", informed}, {"requested", requested}}},
                         {"sys_acts", acts},
                         {"response", sys.value("text", "")},
                         {"domain", domain}});
      } catch (const SkipTurn& s) {
        ++log.skipped_turns;
        log.warnings.push_back("dialog " + id + ": turn skipped (" + s.why + ")");
      } catch (const json::exception& e) {
        ++log.skipped_turns;
        log.warnings.push_back("dialog " + id + ": turn skipped (" + e.what() + ")");
      }
    }
    if (entries.size() % 2) log.warnings.push_back("dialog " + id + ": trailing user entry without system reply dropped");
    b.dialogs.push_back({{"id", id}, {"goal", goal}, {"turns", turns}});
  }
  if (dropped_book) log.warnings.push_back("goal booking constraints dropped");
  return {parse_canonical(b.document()), log};
}

}  // namespace

Conversion convert_raw(const std::filesystem::path& path, RawSchema schema) {
  Conversion c = schema == RawSchema::camrest ? convert_camrest(path) : convert_multiwoz(path);
  if (c.log.skipped_turns)
    logger().warn("conversion skipped {} of {} turns with unparseable act annotations", c.log.skipped_turns,
                  c.log.turns);
  return c;
}

}  // namespace parg
