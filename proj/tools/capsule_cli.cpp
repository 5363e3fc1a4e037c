#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "capsule/capsule.hpp"
#include "capsule/errors.hpp"
#include "capsule/hosting.hpp"
#include "capsule/policy/parser.hpp"

namespace {

using namespace capsule;

Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const Bytes& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(data.data()), long(data.size()));
    if (!out) throw Error("cannot write " + path);
}

// Bare integers become numbers, capitalized identifiers principals,
// everything else a string constant.
policy::Term parse_arg(const std::string& s) {
    if (!s.empty() && (std::isdigit(uint8_t(s[0])) || s[0] == '-')) {
        try {
            size_t used = 0;
            int64_t v = std::stoll(s, &used);
            if (used == s.size()) return policy::Term::number(v);
        } catch (const std::exception&) {
        }
    }
    bool ident = !s.empty() && std::isupper(uint8_t(s[0]));
    for (char c : s)
        if (!std::isalnum(uint8_t(c))) ident = false;
    return ident ? policy::Term::principal(s) : policy::Term::string_const(s);
}

// Supporting-assertion file: one `keyfile<TAB>assertion` per line.
std::vector<policy::Assertion> load_supporting(const std::string& path) {
    std::vector<policy::Assertion> out;
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error("supporting line needs `keyfile<TAB>assertion`: " + line);
        auto key = crypto::SigningKey::from_private_der(read_file(line.substr(0, tab)));
        policy::Assertion a = policy::parse_assertion(line.substr(tab + 1));
        policy::sign_assertion(a, key);
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"secure data capsule tool"};
    app.require_subcommand(1);

    std::string policy_file, kind = "dummy", data_file, owner = "Owner";
    std::string cap_file, out_file, key_file, op, invoker, target, service = "Svc";
    std::string supporting_file;
    std::vector<std::string> raw_args;
    int share = 50;

    auto* create = app.add_subcommand("create", "create a capsule");
    create->add_option("--policy", policy_file, "policy text file")->required();
    create->add_option("--kind", kind, "data layer kind");
    create->add_option("--data", data_file, "initial data file")->required();
    create->add_option("--owner", owner, "owner principal name");
    create->add_option("--out", out_file, "capsule output file")->required();

    auto* invoke = app.add_subcommand("invoke", "invoke an operation");
    invoke->add_option("--capsule", cap_file)->required();
    invoke->add_option("--op", op)->required();
    invoke->add_option("--arg", raw_args, "operation arguments");
    invoke->add_option("--as", invoker, "invoker principal name")->required();
    invoke->add_option("--key", key_file, "invoker private key file")->required();
    invoke->add_option("--supporting", supporting_file, "supporting assertions");

    auto* host = app.add_subcommand("host", "transfer to another host");
    host->add_option("--capsule", cap_file)->required();
    host->add_option("--target", target, "target machine name")->required();
    host->add_option("--service", service, "target service name");
    host->add_option("--supporting", supporting_file, "supporting assertions");
    host->add_option("--share", share, "budget share percent to transfer");
    host->add_option("--out", out_file, "transferred capsule file")->required();

    auto* log = app.add_subcommand("log", "print the audit log");
    log->add_option("--capsule", cap_file)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*create) {
            auto owner_key = crypto::SigningKey::generate();
            TrustModule tm("cli", out_file + ".counter");
            Capsule c = Capsule::create({owner, owner_key.public_der()}, owner_key,
                                        to_string(read_file(policy_file)), kind,
                                        read_file(data_file), {}, &tm);
            write_file(out_file, c.serialize_state());
            write_file(out_file + ".owner.key", owner_key.private_der());
            std::cout << "created " << kind << " capsule for " << owner << " at "
                      << out_file << " (owner key: " << out_file << ".owner.key)\n";
        } else if (*invoke) {
            TrustModule tm("cli", cap_file + ".counter");
            Capsule c = Capsule::restore(read_file(cap_file), &tm);
            auto key = crypto::SigningKey::from_private_der(read_file(key_file));
            data::Args args;
            for (const auto& a : raw_args) args.push_back(parse_arg(a));
            std::vector<policy::Assertion> supporting;
            if (!supporting_file.empty()) supporting = load_supporting(supporting_file);
            auto req = make_request(key, invoker, c.id(), op, args,
                                    std::move(supporting));
            InvokeResult r = c.invoke(req);
            write_file(cap_file, c.serialize_state());
            if (r.granted)
                std::cout << to_string(r.response) << "\n";
            else {
                std::cout << "denied: " << r.denial_reason << "\n";
                return 2;
            }
        } else if (*host) {
            TrustModule src_tm("cli", cap_file + ".counter");
            Capsule c = Capsule::restore(read_file(cap_file), &src_tm);
            TrustModule dst_tm(target, out_file + ".counter");
            Bytes code_id = crypto::sha256(to_bytes("base-layer-v1"));
            TransferTarget tgt(target, service, &dst_tm, code_id);
            HostingRequest hr{target, service, {}, share};
            if (!supporting_file.empty()) hr.supporting = load_supporting(supporting_file);
            TransferSource src(&c, {{target, dst_tm.attestation_public_key()}},
                               code_id);
            Bytes m1 = src.step1(hr);
            Bytes m2 = tgt.handle_step1(m1);
            Bytes m3 = src.step3(m2);
            Capsule moved = tgt.handle_step3(m3);
            write_file(cap_file, c.serialize_state());
            write_file(out_file, moved.serialize_state());
            std::cout << "transferred to " << target << "; lineage depth "
                      << moved.lineage().size() << "\n";
        } else if (*log) {
            TrustModule tm("cli", cap_file + ".counter");
            Capsule c = Capsule::restore(read_file(cap_file), &tm);
            for (const auto& e : c.audit_log())
                std::cout << e.counter << " " << e.invoker << " " << e.op << " proof=["
                          << e.proof_indices.size() << " assertions]\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
