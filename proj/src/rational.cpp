#include "qindex/rational.hpp"

namespace qindex {

Rational Rational::parse(const std::string& s) {
    if (s.empty()) throw std::invalid_argument("Rational::parse: empty string");
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) {
            return Rational(mpq_class(s, 10));
        }
        mpz_class num(s.substr(0, slash), 10);
        mpz_class den(s.substr(slash + 1), 10);
        if (den == 0) throw std::invalid_argument("Rational::parse: zero denominator");
        mpq_class q(num, den);
        q.canonicalize();
        return Rational(q);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("Rational::parse: bad literal '" + s + "'");
    }
}

Rational Rational::pow(unsigned e) const {
    mpq_class r(1);
    mpq_class base = v_;
    unsigned k = e;
    while (k) {
        if (k & 1u) r *= base;
        base *= base;
        k >>= 1u;
    }
    return Rational(r);
}

std::string Rational::str() const {
    if (v_.get_den() == 1) return v_.get_num().get_str();
    return v_.get_num().get_str() + "/" + v_.get_den().get_str();
}

std::string GaussianRational::str() const {
    if (is_zero()) return "0";
    if (im.is_zero()) return re.str();
    std::string imabs = im.abs().str();
    std::string ipart = (imabs == "1") ? "i" : imabs + "i";
    if (re.is_zero()) return (im.sign() < 0 ? "-" : "") + ipart;
    return re.str() + (im.sign() < 0 ? "-" : "+") + ipart;
}

}  // namespace qindex
