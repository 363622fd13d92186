#include <fmt/format.h>

#include "deskmate/dataset.hpp"

namespace deskmate::dataset {

namespace {

using actions::ActionKind;
using C = Category;

Slot person(std::string ref) { return {Slot::Type::person, std::move(ref), {}}; }
Slot place(std::string ref) { return {Slot::Type::place, std::move(ref), {}}; }
Slot words(std::vector<std::string> w) { return {Slot::Type::contains, "", std::move(w)}; }

Template contact(const std::string& ref, std::vector<std::string> w, int order) {
  Template t{{ActionKind::Inquire, ActionKind::Inform}, {{"contact", person(ref)}}, order, true};
  if (!w.empty()) t.slots["text"] = words(std::move(w));
  return t;
}
Template notify(const std::string& ref, std::vector<std::string> w, int order) {
  Template t{{ActionKind::Inform}, {{"contact", person(ref)}}, order, true};
  if (!w.empty()) t.slots["text"] = words(std::move(w));
  return t;
}
Template move_to(const std::string& ref, int order) { return {{ActionKind::Move}, {{"target_name", place(ref)}}, order, true}; }
Template qr(const std::string& ref, int order) { return {{ActionKind::SendQRCode}, {{"contact", person(ref)}}, order, true}; }
Template scan(const std::string& ref, int order) { return {{ActionKind::WaitInPlace}, {{"user", person(ref)}}, order, true}; }
Template forward(const std::string& from, const std::string& to, int order) {
  return {{ActionKind::Forward}, {{"source", person(from)}, {"target", person(to)}}, order, true};
}

// Collect from `from` (orders first..first+2), then hand to `to`.
void pickup(std::vector<Template>& t, const std::string& from, int first) {
  t.push_back(move_to(from, first));
  t.push_back(qr(from, first));
  t.push_back(scan(from, first + 1));
}
void dropoff(std::vector<Template>& t, const std::string& to, std::vector<std::string> w, int first) {
  t.push_back(notify(to, std::move(w), 0));
  t.push_back(move_to(to, first));
  t.push_back(qr(to, first));
  t.push_back(scan(to, first + 1));
}

Role fixed(std::string name, std::string id, bool presence = true) {
  return {std::move(name), EntityId{std::move(id)}, std::nullopt, std::nullopt, presence};
}
Role capable(std::string name, std::string kind, std::string preferred) {
  return {std::move(name), std::nullopt, std::move(kind), EntityId{std::move(preferred)}, true};
}

std::string name_of(const std::string& id) {
  std::string n = id.substr(2);
  n[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(n[0])));
  return n;
}

BaseSpec borrow(std::string id, std::string kind, std::string owner, std::string requester, std::vector<C> plan) {
  BaseSpec b{std::move(id), "borrow_item",
             fmt::format("Please borrow {}'s {} and bring it to me.", name_of(owner), kind), EntityId{requester}, {},
             std::move(plan)};
  b.gold.roles = {capable("owner", kind, owner)};
  b.gold.templates.push_back(contact("@owner", {kind}, 1));
  pickup(b.gold.templates, "@owner", 2);
  dropoff(b.gold.templates, "@requester", {}, 4);
  return b;
}

BaseSpec print(std::string id, std::string document, std::string printer, std::string requester, std::vector<C> plan) {
  BaseSpec b{std::move(id), "print_document",
             fmt::format("Please ask {} to print my {} and bring the printout to me.", name_of(printer), document),
             EntityId{requester}, {}, std::move(plan)};
  b.gold.roles = {capable("printer", "printer", printer)};
  b.gold.templates.push_back(forward("@requester", "@printer", 1));
  b.gold.templates.push_back(contact("@printer", {"print"}, 1));
  pickup(b.gold.templates, "@printer", 2);
  dropoff(b.gold.templates, "@requester", {}, 4);
  return b;
}

BaseSpec coffee(std::string id, std::string owner, std::string requester, std::vector<C> plan) {
  BaseSpec b{std::move(id), "buy_coffee",
             fmt::format("Please get me a coffee from the coffee machine using {}'s coffee card.", name_of(owner)),
             EntityId{requester}, {}, std::move(plan)};
  b.gold.roles = {capable("owner", "coffee card", owner)};
  b.gold.templates.push_back(contact("@owner", {"coffee"}, 1));
  pickup(b.gold.templates, "@owner", 2);
  b.gold.templates.push_back(move_to("f_coffee_machine", 4));
  dropoff(b.gold.templates, "@requester", {}, 5);
  return b;
}

BaseSpec pen_for_signer(std::string id, std::string owner, std::string signer, std::string requester,
                        std::vector<C> plan) {
  BaseSpec b{std::move(id), "pen_for_signature",
             fmt::format("{} needs to sign a form. Please borrow {}'s pen and bring it to {}.", name_of(signer),
                         name_of(owner), name_of(signer)),
             EntityId{requester}, {}, std::move(plan)};
  b.gold.roles = {capable("owner", "pen", owner), fixed("signer", signer)};
  b.gold.templates.push_back(contact("@owner", {"pen"}, 1));
  pickup(b.gold.templates, "@owner", 2);
  dropoff(b.gold.templates, "@signer", {"sign"}, 4);
  return b;
}

BaseSpec deliver(std::string id, std::string kind, std::string recipient, std::string requester, std::vector<C> plan) {
  BaseSpec b{std::move(id), "deliver_item", fmt::format("Please take my {} to {}.", kind, name_of(recipient)),
             EntityId{requester}, {}, std::move(plan)};
  b.gold.roles = {fixed("recipient", recipient)};
  b.gold.templates.push_back(contact("@requester", {kind}, 1));
  pickup(b.gold.templates, "@requester", 2);
  dropoff(b.gold.templates, "@recipient", {}, 4);
  return b;
}

BaseSpec print_and_sign(std::string id, std::string document, std::string printer, std::string signer,
                        std::string requester, std::vector<C> plan) {
  BaseSpec b{std::move(id), "print_and_sign",
             fmt::format("Please have {} print my {}, then take the printout to {} to sign.", name_of(printer), document,
                         name_of(signer)),
             EntityId{requester}, {}, std::move(plan)};
  b.gold.roles = {capable("printer", "printer", printer), fixed("signer", signer)};
  b.gold.templates.push_back(forward("@requester", "@printer", 1));
  b.gold.templates.push_back(contact("@printer", {"print"}, 1));
  pickup(b.gold.templates, "@printer", 2);
  dropoff(b.gold.templates, "@signer", {"sign"}, 4);
  return b;
}

BaseSpec tell(std::string id, std::string recipient, std::string message, std::vector<std::string> w,
              std::string requester) {
  BaseSpec b{std::move(id), "notify", fmt::format("Please tell {} that {}.", name_of(recipient), message),
             EntityId{requester}, {}, std::vector<C>(6, C::l1)};
  b.gold.roles = {fixed("recipient", recipient, false)};
  b.gold.templates.push_back(notify("@recipient", std::move(w), 1));
  return b;
}

BaseSpec tell_group(std::string id, std::string message, std::vector<std::string> w, std::string requester) {
  BaseSpec b{std::move(id), "notify", fmt::format("Please let the Office Group know that {}.", message),
             EntityId{requester}, {}, std::vector<C>(6, C::l1)};
  b.gold.templates.push_back({{ActionKind::Inform}, {{"contact", {Slot::Type::group, "g_office", {}}}, {"text", words(std::move(w))}}, 1, true});
  return b;
}

}  // namespace

std::vector<BaseSpec> default_bases() {
  // Variant plans: 60 L1, 73 L2, 25 L3 achievable, 22 L3 unachievable.
  const std::vector<C> four_l2 = {C::l2, C::l2, C::l2, C::l2, C::l3_achievable, C::l1};
  const std::vector<C> standard = {C::l2, C::l2, C::l2, C::l3_achievable, C::l3_unachievable, C::l1};
  const std::vector<C> two_l3a_no_l3u = {C::l2, C::l2, C::l2, C::l3_achievable, C::l3_achievable, C::l1};
  const std::vector<C> two_l3a_no_l1 = {C::l2, C::l2, C::l2, C::l3_achievable, C::l3_achievable, C::l3_unachievable};
  const std::vector<C> fixed_only = {C::l3_unachievable, C::l3_unachievable, C::l1, C::l1, C::l1, C::l1};

  return {
      borrow("b01", "pen", "h_wu", "h_lee", four_l2),
      borrow("b02", "stapler", "h_mao", "h_zhang", four_l2),
      borrow("b03", "charger", "h_yang", "h_wang", four_l2),
      borrow("b04", "umbrella", "h_zhou", "h_liu", four_l2),
      borrow("b05", "tape", "h_wang", "h_yang", four_l2),
      borrow("b06", "scissors", "h_chen", "h_zhao", four_l2),
      borrow("b07", "calculator", "h_zhao", "h_huang", four_l2),
      borrow("b08", "usb drive", "h_huang", "h_xu", two_l3a_no_l3u),
      print("b09", "report", "h_mao", "h_lee", two_l3a_no_l1),
      print("b10", "contract", "h_wu", "h_zhang", two_l3a_no_l1),
      print("b11", "slides", "h_mao", "h_liu", standard),
      print("b12", "budget", "h_wu", "h_zhao", standard),
      print("b13", "invoice", "h_mao", "h_yang", standard),
      coffee("b14", "h_zhou", "h_lee", standard),
      coffee("b15", "h_chen", "h_mao", standard),
      coffee("b16", "h_zhou", "h_sun", standard),
      coffee("b17", "h_chen", "h_ma", standard),
      pen_for_signer("b18", "h_zhang", "h_sun", "h_huang", standard),
      pen_for_signer("b19", "h_chen", "h_hu", "h_mao", standard),
      pen_for_signer("b20", "h_wu", "h_zhu", "h_xu", standard),
      deliver("b21", "mug", "h_mao", "h_lee", fixed_only),
      deliver("b22", "stapler", "h_chen", "h_liu", fixed_only),
      deliver("b23", "charger", "h_zhou", "h_huang", fixed_only),
      deliver("b24", "umbrella", "h_wang", "h_sun", fixed_only),
      print_and_sign("b25", "memo", "h_wu", "h_zhao", "h_huang", standard),
      print_and_sign("b26", "proposal", "h_mao", "h_lee", "h_ma", standard),
      tell("b27", "h_wang", "the team meeting moved to 3 pm", {"meeting"}, "h_lee"),
      tell("b28", "h_zhu", "lunch is waiting in the fridge", {"lunch"}, "h_zhao"),
      tell_group("b29", "the printer room is closed today", {"printer room"}, "h_chen"),
      tell("b30", "h_yang", "a package has arrived at Reception", {"package"}, "h_xu"),
  };
}

}  // namespace deskmate::dataset
