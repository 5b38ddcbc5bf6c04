#include <accgadget/io.hpp>

#include <json.hpp>

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace accgadget {

using json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path)
{
   std::ifstream in(path, std::ios::binary);
   if (!in)
      throw parse_error("cannot open " + path.string());
   std::ostringstream ss;
   ss << in.rdbuf();
   return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text)
{
   std::ofstream out(path, std::ios::binary | std::ios::trunc);
   if (!out)
      throw std::runtime_error("cannot write " + path.string());
   out << text;
}

namespace {

const std::set<std::string> known_keys {
   "n", "f", "p", "delta", "k", "k_cp", "sigma", "T_checkpoint", "T_timeout", "quorum_preset", "q_accept", "q_reject",
   "q_bft", "bft_epoch_len", "bft_pause_while_waiting", "gadget_enabled", "GST", "GAT", "pre_gst_policy",
   "adversarial_set", "groups", "sleep_schedule", "random_sleep", "strategy", "tx_rate", "tx_schedule", "horizon",
   "seed", "evidence_nodes"};

[[noreturn]] void bad_field(const std::string& field, const std::string& want)
{
   throw parse_error("field '" + field + "': expected " + want);
}

template <typename T>
T as_int(const json& v, const std::string& field)
{
   if (!v.is_number_integer())
      bad_field(field, "integer");
   if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned())
         return static_cast<T>(v.get<std::uint64_t>());
      const auto x = v.get<std::int64_t>();
      if (x < 0)
         bad_field(field, "non-negative integer");
      return static_cast<T>(x);
   } else {
      return static_cast<T>(v.get<std::int64_t>());
   }
}

double as_double(const json& v, const std::string& field)
{
   if (!v.is_number())
      bad_field(field, "number");
   return v.get<double>();
}

bool as_bool(const json& v, const std::string& field)
{
   if (!v.is_boolean())
      bad_field(field, "boolean");
   return v.get<bool>();
}

std::string as_string(const json& v, const std::string& field)
{
   if (!v.is_string())
      bad_field(field, "string");
   return v.get<std::string>();
}

const json& as_array(const json& v, const std::string& field)
{
   if (!v.is_array())
      bad_field(field, "array");
   return v;
}

template <typename T>
std::vector<T> int_list(const json& v, const std::string& field)
{
   std::vector<T> out;
   for (std::size_t i = 0; i < as_array(v, field).size(); ++i)
      out.push_back(as_int<T>(v[i], field + "[" + std::to_string(i) + "]"));
   return out;
}

const json& member(const json& obj, const char* key, const std::string& field)
{
   if (!obj.is_object() || !obj.contains(key))
      throw parse_error("field '" + field + "." + key + "': missing");
   return obj.at(key);
}

std::size_t line_of(const std::string& text, std::size_t byte)
{
   std::size_t line = 1;
   for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
      line += text[i] == '\n';
   return line;
}

} // namespace

Scenario parse_scenario(const std::string& text)
{
   json doc;
   try {
      doc = json::parse(text);
   } catch (const nlohmann::json::parse_error& e) {
      throw parse_error("line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
   }
   if (!doc.is_object())
      throw parse_error("line 1: scenario must be an object");
   for (const auto& [key, _] : doc.items())
      if (!known_keys.count(key))
         throw parse_error("field '" + key + "': unknown key");

   Scenario s;
   auto has = [&](const char* key) { return doc.contains(key); };
   if (!has("n"))
      throw parse_error("field 'n': missing");
   s.chain.n = as_int<std::uint32_t>(doc["n"], "n");
   if (has("f"))
      s.chain.f = as_int<std::uint32_t>(doc["f"], "f");
   if (has("p"))
      s.chain.p = as_double(doc["p"], "p");
   if (has("delta"))
      s.chain.delta = as_int<Slot>(doc["delta"], "delta");
   if (has("sigma")) {
      s.chain.sigma = as_int<std::int64_t>(doc["sigma"], "sigma");
      s.chain.k = s.chain.k_cp = s.chain.sigma;
   }
   if (has("k"))
      s.chain.k = as_int<std::int64_t>(doc["k"], "k");
   if (has("k_cp"))
      s.chain.k_cp = as_int<std::int64_t>(doc["k_cp"], "k_cp");

   if (has("T_checkpoint"))
      s.gadget.T_checkpoint = as_int<Slot>(doc["T_checkpoint"], "T_checkpoint");
   if (has("T_timeout"))
      s.gadget.T_timeout = as_int<Slot>(doc["T_timeout"], "T_timeout");
   if (has("quorum_preset"))
      s.quorum_preset = as_string(doc["quorum_preset"], "quorum_preset");
   s.apply_preset();
   if (has("q_accept"))
      s.gadget.q_accept = as_int<std::uint32_t>(doc["q_accept"], "q_accept");
   if (has("q_reject"))
      s.gadget.q_reject = as_int<std::uint32_t>(doc["q_reject"], "q_reject");
   if (has("q_bft"))
      s.q_bft = as_int<std::uint32_t>(doc["q_bft"], "q_bft");
   if (has("bft_epoch_len"))
      s.bft_epoch_len = as_int<Slot>(doc["bft_epoch_len"], "bft_epoch_len");
   if (has("bft_pause_while_waiting"))
      s.bft_pause_while_waiting = as_bool(doc["bft_pause_while_waiting"], "bft_pause_while_waiting");
   if (has("gadget_enabled"))
      s.gadget_enabled = as_bool(doc["gadget_enabled"], "gadget_enabled");

   if (has("horizon"))
      s.horizon = as_int<Slot>(doc["horizon"], "horizon");
   if (has("seed"))
      s.seed = as_int<std::uint64_t>(doc["seed"], "seed");
   if (has("GST"))
      s.gst = as_int<Slot>(doc["GST"], "GST");
   if (has("GAT")) {
      const json& g = doc["GAT"];
      if (g.is_string() && g.get<std::string>() == "inf")
         s.gat = s.horizon;
      else
         s.gat = as_int<Slot>(g, "GAT");
   }
   if (has("pre_gst_policy")) {
      try {
         s.pre_gst_policy = delay_policy_from_string(as_string(doc["pre_gst_policy"], "pre_gst_policy"));
      } catch (const config_invalid& e) {
         throw parse_error(std::string("field 'pre_gst_policy': ") + e.what());
      }
   }
   if (has("strategy")) {
      try {
         s.strategy = strategy_from_string(as_string(doc["strategy"], "strategy"));
      } catch (const config_invalid& e) {
         throw parse_error(std::string("field 'strategy': ") + e.what());
      }
   }
   if (has("adversarial_set"))
      s.adversarial = int_list<NodeId>(doc["adversarial_set"], "adversarial_set");
   if (has("groups"))
      s.groups = int_list<std::uint32_t>(doc["groups"], "groups");
   if (has("evidence_nodes"))
      s.evidence_nodes = int_list<NodeId>(doc["evidence_nodes"], "evidence_nodes");
   if (has("sleep_schedule")) {
      const json& a = as_array(doc["sleep_schedule"], "sleep_schedule");
      for (std::size_t i = 0; i < a.size(); ++i) {
         const std::string f = "sleep_schedule[" + std::to_string(i) + "]";
         s.sleep.push_back({as_int<NodeId>(member(a[i], "node", f), f + ".node"),
                            as_int<Slot>(member(a[i], "from", f), f + ".from"),
                            as_int<Slot>(member(a[i], "to", f), f + ".to")});
      }
   }
   if (has("random_sleep")) {
      const json& r = doc["random_sleep"];
      if (!r.is_object())
         bad_field("random_sleep", "object");
      s.random_sleep.enabled = true;
      for (const auto& [key, v] : r.items()) {
         const std::string f = "random_sleep." + key;
         if (key == "enabled")
            s.random_sleep.enabled = as_bool(v, f);
         else if (key == "mean_awake")
            s.random_sleep.mean_awake = as_double(v, f);
         else if (key == "mean_asleep")
            s.random_sleep.mean_asleep = as_double(v, f);
         else if (key == "max_adversarial_fraction")
            s.random_sleep.max_adversarial_fraction = as_double(v, f);
         else
            throw parse_error("field '" + f + "': unknown key");
      }
   }
   if (has("tx_rate"))
      s.tx_rate = as_double(doc["tx_rate"], "tx_rate");
   if (has("tx_schedule")) {
      const json& a = as_array(doc["tx_schedule"], "tx_schedule");
      for (std::size_t i = 0; i < a.size(); ++i) {
         const std::string f = "tx_schedule[" + std::to_string(i) + "]";
         s.tx_schedule.push_back({as_int<Slot>(member(a[i], "slot", f), f + ".slot"),
                                  as_int<NodeId>(member(a[i], "node", f), f + ".node"),
                                  as_int<TxId>(member(a[i], "tx", f), f + ".tx")});
      }
   }
   return s;
}

Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_file(path)); }

std::string scenario_to_json(const Scenario& s)
{
   json j;
   j["n"] = s.chain.n;
   j["f"] = s.chain.f;
   j["p"] = s.chain.p;
   j["delta"] = s.chain.delta;
   j["k"] = s.chain.k;
   j["k_cp"] = s.chain.k_cp;
   j["sigma"] = s.chain.sigma;
   j["T_checkpoint"] = s.gadget.T_checkpoint;
   j["T_timeout"] = s.gadget.T_timeout;
   j["quorum_preset"] = s.quorum_preset;
   j["q_accept"] = s.gadget.q_accept;
   j["q_reject"] = s.gadget.q_reject;
   j["q_bft"] = s.effective_q_bft();
   j["bft_epoch_len"] = s.effective_epoch_len();
   j["bft_pause_while_waiting"] = s.bft_pause_while_waiting;
   j["gadget_enabled"] = s.gadget_enabled;
   j["GST"] = s.gst;
   j["GAT"] = s.gat;
   j["pre_gst_policy"] = to_string(s.pre_gst_policy);
   j["adversarial_set"] = s.adversarial;
   j["groups"] = s.groups;
   j["sleep_schedule"] = json::array();
   for (const auto& i : s.sleep)
      j["sleep_schedule"].push_back({{"node", i.node}, {"from", i.from}, {"to", i.to}});
   if (s.random_sleep.enabled)
      j["random_sleep"] = {{"enabled", true},
                           {"mean_awake", s.random_sleep.mean_awake},
                           {"mean_asleep", s.random_sleep.mean_asleep},
                           {"max_adversarial_fraction", s.random_sleep.max_adversarial_fraction}};
   j["strategy"] = to_string(s.strategy);
   j["tx_rate"] = s.tx_rate;
   j["tx_schedule"] = json::array();
   for (const auto& t : s.tx_schedule)
      j["tx_schedule"].push_back({{"slot", t.slot}, {"node", t.node}, {"tx", t.tx}});
   j["horizon"] = s.horizon;
   j["seed"] = s.seed;
   j["evidence_nodes"] = s.evidence_nodes;
   return j.dump(2) + "\n";
}

} // namespace accgadget
