#include <fstream>
#include <sstream>

#include "parg/corpus.hpp"

namespace parg {

using nlohmann::json;

namespace {

std::string normalize_value(const std::string& v) { return join(tokenize(v)); }

std::string value_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  throw SchemaError("expected a string or scalar value, got " + v.dump());
}

struct Where {
  std::string dialog;
  int turn = 0;

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    std::ostringstream msg;
    msg << "schema violation";
    if (!dialog.empty()) msg << " in dialog '" << dialog << "'";
    if (turn > 0) msg << " turn " << turn;
    msg << ", field '" << field << "': " << what;
    throw SchemaError(msg.str());
  }

  const json& require(const json& obj, const char* field, json::value_t type) const {
    if (!obj.is_object()) fail(field, "enclosing value is not an object");
    auto it = obj.find(field);
    if (it == obj.end()) fail(field, "missing");
    const bool ok = it->type() == type ||
                    (type == json::value_t::number_integer && it->type() == json::value_t::number_unsigned);
    if (!ok) fail(field, std::string("expected ") + json(type).type_name() + ", got " + it->type_name());
    return *it;
  }
};

Ontology parse_ontology(const json& j) {
  Where w;
  Ontology ont;
  const auto& domains = w.require(j, "domains", json::value_t::object);
  for (const auto& [domain, dj] : domains.items()) {
    ont.domains.insert(domain);
    auto& specs = ont.slots[domain];
    if (!dj.contains("slots")) continue;
    for (const auto& [slot, sj] : dj.at("slots").items()) {
      SlotSpec spec;
      spec.informable = sj.value("informable", false);
      spec.requestable = sj.value("requestable", false);
      specs[slot] = spec;
      if (sj.contains("values")) {
        auto& vals = ont.values[{domain, slot}];
        for (const auto& v : sj.at("values")) {
          auto norm = normalize_value(value_text(v));
          if (norm.empty()) throw SchemaError("ontology: empty value for slot '" + domain + "." + slot + "'");
          vals.insert(norm);
        }
      }
    }
  }
  if (j.contains("act_types"))
    for (const auto& a : j.at("act_types")) ont.act_types.insert(a.get<std::string>());
  ont.validate();
  return ont;
}

json ontology_to_json(const Ontology& ont) {
  json domains = json::object();
  for (const auto& domain : ont.domains) {
    json slots = json::object();
    auto it = ont.slots.find(domain);
    if (it != ont.slots.end()) {
      for (const auto& [slot, spec] : it->second) {
        json sj = {{"informable", spec.informable}, {"requestable", spec.requestable}};
        auto v = ont.values.find({domain, slot});
        if (v != ont.values.end()) sj["values"] = std::vector<std::string>(v->second.begin(), v->second.end());
        slots[slot] = sj;
      }
    }
    domains[domain] = {{"slots", slots}};
  }
  return {{"domains", domains}, {"act_types", std::vector<std::string>(ont.act_types.begin(), ont.act_types.end())}};
}

void check_slot(const Ontology& ont, const std::string& domain, const std::string& slot, const Where& w,
                const std::string& field) {
  if (!ont.has_domain(domain)) w.fail(field, "unknown domain '" + domain + "'");
  if (!ont.has_slot(domain, slot)) w.fail(field, "unknown slot '" + slot + "' in domain '" + domain + "'");
}

BeliefState parse_state(const json& j, const Ontology& ont, const Where& w, const std::string& field) {
  BeliefState st = belief_from_json(j);
  for (const auto& [key, value] : st.informed) {
    check_slot(ont, key.domain, key.slot, w, field + ".informed");
    if (value.empty()) w.fail(field + ".informed", "empty value for slot '" + key.slot + "'");
  }
  for (const auto& key : st.requested) check_slot(ont, key.domain, key.slot, w, field + ".requested");
  return st;
}

Turn parse_turn(const json& tj, const Ontology& ont, Where w) {
  Turn turn;
  turn.index = w.require(tj, "t", json::value_t::number_integer).get<int>();
  w.turn = turn.index;
  turn.user = tokenize(w.require(tj, "user", json::value_t::string).get<std::string>());
  turn.state = parse_state(w.require(tj, "state", json::value_t::object), ont, w, "state");
  for (const auto& aj : w.require(tj, "sys_acts", json::value_t::array)) {
    DialogAct act;
    act.act_type = w.require(aj, "act", json::value_t::string).get<std::string>();
    act.domain = w.require(aj, "domain", json::value_t::string).get<std::string>();
    if (aj.contains("slot") && !aj.at("slot").is_null()) act.slot = aj.at("slot").get<std::string>();
    if (!ont.act_types.empty() && !ont.act_types.count(act.act_type))
      w.fail("sys_acts", "unknown act type '" + act.act_type + "'");
    if (!ont.has_domain(act.domain)) w.fail("sys_acts", "unknown domain '" + act.domain + "'");
    if (act.slot && !ont.has_slot(act.domain, *act.slot))
      w.fail("sys_acts", "unknown slot '" + *act.slot + "' in domain '" + act.domain + "'");
    turn.sys_acts.push_back(std::move(act));
  }
  turn.response = tokenize(w.require(tj, "response", json::value_t::string).get<std::string>());
  turn.domain = w.require(tj, "domain", json::value_t::string).get<std::string>();
  if (!ont.has_domain(turn.domain)) w.fail("domain", "unknown domain '" + turn.domain + "'");
  return turn;
}

json turn_to_json(const Turn& t) {
  json acts = json::array();
  for (const auto& a : t.sys_acts) {
    json aj = {{"act", a.act_type}, {"domain", a.domain}};
    if (a.slot) aj["slot"] = *a.slot;
    acts.push_back(aj);
  }
  return {{"t", t.index},
          {"user", join(t.user)},
          {"state", belief_to_json(t.state.informed, t.state.requested)},
          {"sys_acts", acts},
          {"response", join(t.response)},
          {"domain", t.domain}};
}

void tag_out_of_ontology(Corpus& corpus, const Turn& turn) {
  for (const auto& [key, value] : turn.state.informed) {
    auto it = corpus.ontology.values.find(key);
    if (it == corpus.ontology.values.end() || !it->second.count(value)) corpus.out_of_ontology.insert({key, value});
  }
}

}  // namespace

json belief_to_json(const std::map<SlotKey, std::string>& informed, const std::set<SlotKey>& requested) {
  json inf = json::object();
  for (const auto& [key, value] : informed) inf[key.domain][key.slot] = value;
  json req = json::object();
  for (const auto& key : requested) req[key.domain].push_back(key.slot);
  return {{"informed", inf}, {"requested", req}};
}

BeliefState belief_from_json(const json& j) {
  BeliefState st;
  if (!j.is_object()) throw SchemaError("belief state must be an object");
  if (j.contains("informed")) {
    for (const auto& [domain, slots] : j.at("informed").items()) {
      if (!slots.is_object()) throw SchemaError("informed['" + domain + "'] must be an object");
      for (const auto& [slot, value] : slots.items()) st.informed[{domain, slot}] = normalize_value(value_text(value));
    }
  }
  if (j.contains("requested")) {
    for (const auto& [domain, slots] : j.at("requested").items()) {
      if (!slots.is_array()) throw SchemaError("requested['" + domain + "'] must be an array");
      for (const auto& s : slots) st.requested.insert({domain, s.get<std::string>()});
    }
  }
  return st;
}

Corpus parse_canonical(const json& doc) {
  Where top;
  Corpus corpus;
  corpus.ontology = parse_ontology(top.require(doc, "ontology", json::value_t::object));
  auto& ont = corpus.ontology;

  for (const auto& ej : top.require(doc, "database", json::value_t::array)) {
    Entity e;
    e.domain = top.require(ej, "domain", json::value_t::string).get<std::string>();
    if (!ont.has_domain(e.domain)) throw SchemaError("database: unknown domain '" + e.domain + "'");
    for (const auto& [k, v] : ej.items())
      if (k != "domain") e.fields[k] = normalize_value(value_text(v));
    for (const auto& [slot, spec] : ont.slots[e.domain]) {
      if (spec.informable && !e.fields.count(slot))
        throw SchemaError("database: entity '" + (e.fields.count("name") ? e.fields["name"] : std::string("?")) +
                          "' lacks informable slot '" + slot + "'");
    }
    corpus.database.push_back(std::move(e));
  }
  // Requestable-only slots (name, phone, ...) draw their values from the database.
  for (const auto& e : corpus.database)
    for (const auto& [slot, spec] : ont.slots[e.domain])
      if (spec.requestable && !spec.informable) {
        auto it = e.fields.find(slot);
        if (it != e.fields.end() && !it->second.empty()) ont.values[{e.domain, slot}].insert(it->second);
      }

  std::set<std::string> seen_ids;
  for (const auto& dj : top.require(doc, "dialogs", json::value_t::array)) {
    Where w;
    Dialog d;
    d.id = w.require(dj, "id", json::value_t::string).get<std::string>();
    w.dialog = d.id;
    if (!seen_ids.insert(d.id).second) w.fail("id", "duplicate dialog id");
    if (dj.contains("goal") && !dj.at("goal").is_null()) {
      const auto& gj = dj.at("goal");
      auto st = parse_state(gj, ont, w, "goal");
      d.goal = Goal{st.informed, st.requested};
    }
    int expected = 1;
    for (const auto& tj : w.require(dj, "turns", json::value_t::array)) {
      Turn turn = parse_turn(tj, ont, w);
      if (turn.index != expected)
        w.fail("t", "turn indices must be contiguous from 1; expected " + std::to_string(expected) + ", got " +
                        std::to_string(turn.index));
      ++expected;
      tag_out_of_ontology(corpus, turn);
      d.turns.push_back(std::move(turn));
    }
    corpus.dialogs.push_back(std::move(d));
  }

  if (doc.contains("augmented_turns")) {
    for (const auto& aj : doc.at("augmented_turns")) {
      Where w;
      AugmentedTurn a;
      a.source_dialog = w.require(aj, "source", json::value_t::string).get<std::string>();
      w.dialog = a.source_dialog;
      const Dialog* src = corpus.find(a.source_dialog);
      if (!src) w.fail("source", "augmented turn refers to unknown dialog");
      a.turn = parse_turn(w.require(aj, "turn", json::value_t::object), ont, w);
      if (a.turn.index < 1 || a.turn.index > static_cast<int>(src->turns.size()))
        w.fail("t", "augmented turn index out of range");
      corpus.augmented.push_back(std::move(a));
    }
  }

  delexicalize_corpus(corpus);
  return corpus;
}

Corpus load_canonical(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("corpus file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_canonical(doc);
}

json to_canonical_json(const Corpus& corpus) {
  json db = json::array();
  for (const auto& e : corpus.database) {
    json ej = {{"domain", e.domain}};
    for (const auto& [k, v] : e.fields) ej[k] = v;
    db.push_back(ej);
  }
  json dialogs = json::array();
  for (const auto& d : corpus.dialogs) {
    json turns = json::array();
    for (const auto& t : d.turns) turns.push_back(turn_to_json(t));
    json dj = {{"id", d.id}, {"turns", turns}};
    dj["goal"] = d.goal ? belief_to_json(d.goal->constraints, d.goal->requested) : json(nullptr);
    dialogs.push_back(dj);
  }
  json doc = {{"ontology", ontology_to_json(corpus.ontology)}, {"database", db}, {"dialogs", dialogs}};
  if (!corpus.augmented.empty()) {
    json aug = json::array();
    for (const auto& a : corpus.augmented) aug.push_back({{"source", a.source_dialog}, {"turn", turn_to_json(a.turn)}});
    doc["augmented_turns"] = aug;
  }
  return doc;
}

void save_canonical(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write corpus file '" + path.string() + "'");
  out << to_canonical_json(corpus).dump(1) << '\n';
}

}  // namespace parg
